# the examples/ corpus is reference material, not part of this package's suite
collect_ignore = ["examples"]
