# Empty file to make src a package