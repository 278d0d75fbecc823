# Networks package
