# Empty file to make bench domain a package
