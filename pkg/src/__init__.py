# Multifractal image segmentation
