#pragma once

#include "simrecon/image.hpp"

namespace testing_support {

// Direct circular convolution with a PSF centered at (h/2, w/2). O(n^4).
simrecon::Image2D circular_convolve(const simrecon::Image2D &img, const simrecon::Image2D &psf);

// Mean SSIM by brute force: for every valid 11x11 window, weighted local
// statistics from the full 2D Gaussian weights (sigma 1.5).
double ssim_oracle(const simrecon::Image2D &a, const simrecon::Image2D &b);

}  // namespace testing_support
