# Tests package for AttractorLab
