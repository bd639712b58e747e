# Empty file to make models domain a package
