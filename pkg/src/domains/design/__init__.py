# Empty file to make design domain a package
