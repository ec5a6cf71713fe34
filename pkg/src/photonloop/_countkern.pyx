# cython: language_level=3
# placeholder; replaced by the count-trajectory kernel
KERNEL_LANE = "compiled"
