# Command-line driver
