#ifndef IRBSEG_SPECTRAL_HPP
#define IRBSEG_SPECTRAL_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "irbseg/dataset.hpp"
#include "irbseg/image.hpp"

namespace irbseg {

enum class TargetSampling { fixed, random_per_image };

/// Controls the frequency-domain amplitude swap. beta is the half-width of
/// the centered low-frequency window as a fraction of the smaller spatial
/// dimension; beta = 0 swaps nothing and is the identity transform.
struct SpectralConfig {
    double beta = 0.05;  // in [0, 0.5]
    TargetSampling target_sampling = TargetSampling::random_per_image;
    std::uint64_t seed = 0;
};

/// Real-valued plane used for transforms.
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<double> v;

    Plane() = default;
    Plane(int h, int w, double fill = 0.0) : height(h), width(w), v(static_cast<std::size_t>(h) * w, fill) {}
    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

/// 2-D DFT split into magnitude and angle. Unnormalized forward transform:
/// a constant plane of value c has amplitude c*H*W at the zero-frequency bin.
/// Throws ArgumentError on non-finite input.
std::pair<Plane, Plane> amplitude_phase(const Plane& channel);

/// Rebuilds the spatial signal from amplitude and phase; inverse of
/// amplitude_phase up to floating-point round-off.
Plane reconstruct_from_amplitude_phase(const Plane& amplitude, const Plane& phase);

/// The per-channel swap before quantization; returns the real part of the
/// inverse transform. When max_imag_residue is non-null it receives the
/// largest |imaginary| component discarded, as a fraction of 255.
std::array<Plane, 3> spectral_blend_channels(const Image8& source, const Image8& target, const SpectralConfig& config,
                                             double* max_imag_residue = nullptr);

/// Source keeps its phase everywhere and adopts the target's amplitude inside
/// the centered window of half-width floor(beta * min(H, W)); the result is
/// clipped to [0, 255] and rounded. Images must have identical dimensions.
Image8 spectral_blend(const Image8& source, const Image8& target, const SpectralConfig& config);

/// Side length (in bins, along one axis) of the swap window for an HxW image;
/// 0 means the identity transform.
int spectral_window_halfwidth(int height, int width, double beta);

/// Stylizes every source image against a target drawn per config, writes the
/// results (and untouched mask copies) under out_dir, and returns the new
/// manifest. Deterministic and idempotent for a fixed seed.
DatasetManifest batch_stylize(const DatasetManifest& source, const DatasetManifest& target_pool,
                              const SpectralConfig& config, const std::filesystem::path& out_dir);

}  // namespace irbseg

#endif  // IRBSEG_SPECTRAL_HPP
