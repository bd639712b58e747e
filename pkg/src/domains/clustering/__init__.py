# Empty file to make clustering domain a package
