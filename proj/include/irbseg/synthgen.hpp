#ifndef IRBSEG_SYNTHGEN_HPP
#define IRBSEG_SYNTHGEN_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>

#include "irbseg/dataset.hpp"
#include "irbseg/image.hpp"

namespace irbseg {

/// Geometry prior for one foreground shape; sizes and positions are fractions
/// of the smaller image dimension / the image extent.
struct ShapeSpec {
    double base_size = 0.2;      // nominal radius
    double size_jitter = 0.25;   // relative +- spread on base_size
    double center_y = 0.5;
    double center_x = 0.5;
    double center_jitter = 0.06; // absolute +- spread on the center
    double aspect_jitter = 0.2;  // relative +- spread between the two radii
};

struct SimStyle {
    std::array<std::array<std::uint8_t, 3>, 4> palette = {{{35, 20, 25}, {200, 90, 90}, {170, 120, 100}, {150, 60, 80}}};
    double vignette_strength = 0.25;  // 0 disables the vignette
};

struct RealStyle {
    std::array<std::array<std::uint8_t, 3>, 4> palette = {{{60, 25, 35}, {225, 120, 130}, {195, 150, 125}, {180, 80, 105}}};
    double texture_strength = 0.45;   // sinusoidal fill modulation
    double noise_sigma = 0.035;       // additive Gaussian noise, fraction of 255
    double hue_shift_max_deg = 20.0;  // per-image hue rotation, uniform in +-max
    double brightness_jitter = 0.12;  // per-image scale, uniform in 1 +- jitter
};

/// Scene prior for the paired generator. Each sample emphasizes one rotating
/// "focus" class (index mod 3): its shape is scaled by focus_scale and the
/// others by 1/focus_scale, so dominant classes stay balanced across the
/// dataset. focus_scale = 1 disables the emphasis.
struct SceneSpec {
    int image_height = 64;
    int image_width = 64;
    ShapeSpec glottis{0.22, 0.25, 0.62, 0.50, 0.06, 0.2};     // class 1: ellipse
    ShapeSpec epiglottis{0.17, 0.25, 0.35, 0.50, 0.06, 0.2};  // class 2: crescent
    ShapeSpec uvula{0.09, 0.25, 0.16, 0.50, 0.05, 0.15};      // class 3: teardrop
    std::array<double, 3> class_presence = {1.0, 1.0, 1.0};   // per foreground class, in (0, 1]
    double focus_scale = 2.1;
    SimStyle sim;
    RealStyle real;
    std::uint64_t seed = 0;
};

/// The exact analytic geometry a sample was rendered from, for verification.
struct EllipseGeom {
    double cy = 0, cx = 0, ry = 0, rx = 0;  // in pixels
    bool contains(double y, double x) const {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        return dy * dy + dx * dx <= 1.0;
    }
};

struct SampleGeometry {
    std::array<bool, 3> present = {false, false, false};  // GL, EP, UV
    EllipseGeom gl;
    EllipseGeom ep_main, ep_cut;  // crescent = main minus cut
    EllipseGeom uv;               // head circle; the tail triangle hangs below
    double uv_tail = 1.8;         // apex at uv.cy + uv_tail * uv.ry
};

struct RenderedSample {
    Image8 image;
    Mask8 mask;
    SampleGeometry geometry;
};

/// Renders one sample. The mask is exact by construction with fixed z-order
/// UV over EP over GL over BG; degenerate draws (a present shape with no
/// visible pixel) are re-sampled internally and never emitted.
RenderedSample render_sample(const SceneSpec& spec, Domain domain, int sample_index, std::uint64_t sample_seed);

/// Deterministically generates n_sim + n_real samples from the same geometry
/// distribution, rendered in the respective styles, and writes images, masks
/// and manifests under out_dir/sim and out_dir/real.
std::pair<DatasetManifest, DatasetManifest> generate_domain_pair(const SceneSpec& spec, int n_sim, int n_real,
                                                                 const std::filesystem::path& out_dir);

}  // namespace irbseg

#endif  // IRBSEG_SYNTHGEN_HPP
