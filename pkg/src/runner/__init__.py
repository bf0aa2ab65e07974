# Gibbs sampling, segmentation pipeline and table reproduction
