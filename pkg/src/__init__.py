# Earthquake failure-mode association package
