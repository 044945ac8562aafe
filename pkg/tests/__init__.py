# Test package for FDIC OMG