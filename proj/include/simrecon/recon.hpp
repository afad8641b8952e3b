#pragma once

#include <span>
#include <vector>

#include "simrecon/forward_model.hpp"
#include "simrecon/image.hpp"
#include "simrecon/optics.hpp"

namespace simrecon {

struct ReconParams {
  double wiener_w = 0.1;            // added as w^2 to the Wiener denominator
  double apodization_cutoff = 0.0;  // cycles/um; 0 means k_d + max |k0|
  bool use_known_params = false;    // take pattern parameters from the stack
  double modulation_floor = 0.3;    // lower bound on m when rescaling side bands
};

void validate(const ReconParams &params);

/// Center band and the two side bands of one orientation, as separated from
/// the raw spectra (before any shift or modulation scaling):
///   F_j = center + e^{+i phi_j} plus + e^{-i phi_j} minus.
/// 'plus' holds the sample spectrum displaced to +k0, 'minus' to -k0.
struct SeparatedBands {
  ComplexGrid center;
  ComplexGrid plus;
  ComplexGrid minus;
};

/// Pattern parameters recovered for one orientation.
struct AngleEstimate {
  double kx = 0.0;  // cycles/um
  double ky = 0.0;
  std::vector<double> phases;  // one per frame of this angle
  double modulation = 0.0;
  double peak_snr = 0.0;  // side-band peak over the median residual power
};

/// Per-angle band data ready for recombination: side bands already moved
/// back to their true position in frequency space.
struct BandSet {
  ComplexGrid center;
  ComplexGrid plus;   // shifted by -k0
  ComplexGrid minus;  // shifted by +k0
  AngleEstimate params;
};

/// Least-squares unmixing of n >= 3 phase-stepped frames of one
/// orientation. Throws "degenerate phase set" when fewer than three frames
/// are given or the mixing matrix condition number reaches 1e6.
SeparatedBands separate_bands(std::span<const Image2D> frames, std::span<const double> phases);
SeparatedBands separate_spectra(std::span<const ComplexGrid> spectra,
                                std::span<const double> phases);

/// Re-applies the forward mixing; used to verify a separation.
std::vector<ComplexGrid> mix_bands(const SeparatedBands &bands, std::span<const double> phases);

/// Condition number of the n x 3 phase mixing matrix.
double mixing_condition_number(std::span<const double> phases);

/// Per-angle k0 vector, per-frame phases and modulation from the raw data.
/// Throws PatternNotFound when the side-band peak is not distinguishable
/// from the noise floor.
std::vector<AngleEstimate> estimate_pattern_params(const RawSimStack &stack,
                                                   const TransferFunction &otf);

/// Ground-truth parameters carried by a simulated stack, in the same form.
std::vector<AngleEstimate> known_pattern_params(const RawSimStack &stack);

/// Moves a DC-centered band by -k: multiplies its real-space field by
/// e^{-2 pi i k.x}. Exact index roll when k is a whole number of bins.
ComplexGrid shift_band(const ComplexGrid &band, double kx, double ky, double pixel_size);

/// Generalized Wiener combination of all bands with a triangular
/// apodization; returns the real image rescaled to [0, 1].
Image2D wiener_recombine(std::span<const BandSet> bands, const TransferFunction &otf,
                         const ReconParams &params);

/// Estimate (or read) parameters, separate, shift and recombine.
Image2D reconstruct(const RawSimStack &stack, const ReconParams &params);

}  // namespace simrecon
