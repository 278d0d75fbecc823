"""
Frozen constants of the image quality metrics.
"""

# SSIM, single scale, unit dynamic range
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_C1 = SSIM_K1 ** 2
SSIM_C2 = SSIM_K2 ** 2

# Histogram metrics quantize to 8 bits
HIST_LEVELS = 256

# Pixel-domain VIF, evaluated on the 0-255 scale
VIF_SIGMA_NSQ = 2.0
VIF_SCALES = 4
VIF_EPS = 1e-10
VIF_DATA_SCALE = 255.0

# Edge-transfer (Q^AB/F) sigmoid parameters
QABF_GG, QABF_KG, QABF_SG = 0.9994, 15.0, 0.5
QABF_GA, QABF_KA, QABF_SA = 0.9879, 22.0, 0.8
QABF_L = 1.0
# Sobel magnitudes below this are rounding noise from flat regions
QABF_FLAT_EPS = 1e-12

SOBEL_X = ((-1, 0, 1), (-2, 0, 2), (-1, 0, 1))
SOBEL_Y = ((-1, -2, -1), (0, 0, 0), (1, 2, 1))

REPORT_NOTE = (
    "Metrics compare the enhanced output with the clean reference image; EN and SD "
    "are computed on the output alone. Images are on the unit scale [0,1]: SD, PSNR "
    "(peak 1) and SSIM use that scale, EN and MI use 256-bin histograms of the 8-bit "
    "quantized image, VIF rescales to 0-255. SCD uses the degraded input and the "
    "reference as its two sources; QABF uses the reference as its source. Identical "
    "images report PSNR as inf."
)
