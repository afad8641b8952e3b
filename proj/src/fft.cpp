#include "simrecon/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace simrecon {
namespace {

// FFTW's planner is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per (shape, direction) and kept for the
// lifetime of the process.
class PlanCache {
 public:
  fftw_plan get(int width, int height, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(width, height, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<Complex> scratch(static_cast<std::size_t>(width) * height);
    auto *buf = reinterpret_cast<fftw_complex *>(scratch.data());
    fftw_plan plan =
        fftw_plan_dft_2d(height, width, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto &[key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache &plans() {
  static PlanCache cache;
  return cache;
}

void execute(ComplexGrid &grid, int sign) {
  fftw_plan plan = plans().get(grid.width(), grid.height(), sign);
  auto *buf = reinterpret_cast<fftw_complex *>(grid.values().data());
  fftw_execute_dft(plan, buf, buf);
}

template <typename Grid>
Grid shifted(const Grid &in, int rows_by, int cols_by) {
  Grid out = in;
  const int w = in.width();
  const int h = in.height();
  for (int r = 0; r < h; ++r) {
    const int rr = (r + rows_by) % h;
    for (int c = 0; c < w; ++c) out(rr, (c + cols_by) % w) = in(r, c);
  }
  return out;
}

}  // namespace

ComplexGrid fftshift(const ComplexGrid &grid) {
  return shifted(grid, grid.height() / 2, grid.width() / 2);
}

Image2D fftshift(const Image2D &img) { return shifted(img, img.height() / 2, img.width() / 2); }

static ComplexGrid ifftshift(const ComplexGrid &grid) {
  return shifted(grid, (grid.height() + 1) / 2, (grid.width() + 1) / 2);
}

ComplexGrid fft2(const ComplexGrid &spatial) {
  ComplexGrid work = spatial;
  execute(work, FFTW_FORWARD);
  return fftshift(work);
}

ComplexGrid fft2(const Image2D &spatial) { return fft2(to_complex(spatial)); }

ComplexGrid ifft2(const ComplexGrid &spectrum) {
  ComplexGrid work = ifftshift(spectrum);
  execute(work, FFTW_BACKWARD);
  work *= 1.0 / static_cast<double>(work.size());
  return work;
}

}  // namespace simrecon
