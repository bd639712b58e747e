# Empty file to make sampler domain a package
