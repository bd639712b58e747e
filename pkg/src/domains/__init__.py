# Empty file to make domains a package