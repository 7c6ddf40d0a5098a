# User interface modules
