# Empty file to make distances domain a package
