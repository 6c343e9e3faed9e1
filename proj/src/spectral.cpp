#include "irbseg/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>

#include "irbseg/errors.hpp"
#include "irbseg/rng.hpp"

namespace irbseg {

namespace {

// FFTW plan creation is not thread-safe; execution of a created plan is.
std::mutex g_fftw_mutex;

struct FftwBuffer {
    fftw_complex* p = nullptr;
    explicit FftwBuffer(std::size_t n) : p(fftw_alloc_complex(n)) {}
    ~FftwBuffer() { fftw_free(p); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

std::vector<std::complex<double>> fft2(const Plane& plane) {
    const int h = plane.height, w = plane.width;
    const std::size_t n = static_cast<std::size_t>(h) * w;
    FftwBuffer in(n), out(n);
    for (std::size_t i = 0; i < n; ++i) {
        in.p[i][0] = plane.v[i];
        in.p[i][1] = 0.0;
    }
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        plan = fftw_plan_dft_2d(h, w, in.p, out.p, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftw_destroy_plan(plan);
    }
    std::vector<std::complex<double>> spectrum(n);
    for (std::size_t i = 0; i < n; ++i) spectrum[i] = {out.p[i][0], out.p[i][1]};
    return spectrum;
}

// Inverse transform with 1/(H*W) normalization; returns the complex result so
// callers can inspect the imaginary residue.
std::vector<std::complex<double>> ifft2(const std::vector<std::complex<double>>& spectrum, int h, int w) {
    const std::size_t n = static_cast<std::size_t>(h) * w;
    FftwBuffer in(n), out(n);
    for (std::size_t i = 0; i < n; ++i) {
        in.p[i][0] = spectrum[i].real();
        in.p[i][1] = spectrum[i].imag();
    }
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        plan = fftw_plan_dft_2d(h, w, in.p, out.p, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftw_destroy_plan(plan);
    }
    const double scale = 1.0 / static_cast<double>(n);
    std::vector<std::complex<double>> result(n);
    for (std::size_t i = 0; i < n; ++i) result[i] = std::complex<double>(out.p[i][0], out.p[i][1]) * scale;
    return result;
}

Plane channel_plane(const Image8& image, int c) {
    Plane plane(image.height, image.width);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) plane.at(y, x) = static_cast<double>(image.at(y, x, c));
    return plane;
}

}  // namespace

int spectral_window_halfwidth(int height, int width, double beta) {
    if (beta < 0.0 || beta > 0.5) throw ArgumentError("beta must be in [0, 0.5], got " + std::to_string(beta));
    int b = static_cast<int>(std::floor(beta * std::min(height, width)));
    // The symmetric window [c-b, c+b] must stay inside the spectrum so the
    // swapped bins keep their conjugate counterparts (real output).
    const int cy = height / 2, cx = width / 2;
    b = std::min({b, cy, height - 1 - cy, cx, width - 1 - cx});
    return std::max(b, 0);
}

std::pair<Plane, Plane> amplitude_phase(const Plane& channel) {
    for (double v : channel.v)
        if (!std::isfinite(v)) throw ArgumentError("amplitude_phase: input contains non-finite values");
    const auto spectrum = fft2(channel);
    Plane amplitude(channel.height, channel.width);
    Plane phase(channel.height, channel.width);
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        amplitude.v[i] = std::abs(spectrum[i]);
        phase.v[i] = std::arg(spectrum[i]);
    }
    return {std::move(amplitude), std::move(phase)};
}

Plane reconstruct_from_amplitude_phase(const Plane& amplitude, const Plane& phase) {
    if (amplitude.height != phase.height || amplitude.width != phase.width)
        throw ArgumentError("amplitude and phase dimensions differ");
    std::vector<std::complex<double>> spectrum(amplitude.v.size());
    for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum[i] = std::polar(amplitude.v[i], phase.v[i]);
    const auto complex_out = ifft2(spectrum, amplitude.height, amplitude.width);
    Plane out(amplitude.height, amplitude.width);
    for (std::size_t i = 0; i < complex_out.size(); ++i) out.v[i] = complex_out[i].real();
    return out;
}

std::array<Plane, 3> spectral_blend_channels(const Image8& source, const Image8& target, const SpectralConfig& config,
                                             double* max_imag_residue) {
    if (source.height != target.height || source.width != target.width)
        throw ArgumentError("spectral_blend: source is " + std::to_string(source.height) + "x" +
                            std::to_string(source.width) + " but target is " + std::to_string(target.height) + "x" +
                            std::to_string(target.width));
    const int h = source.height, w = source.width;
    const int b = spectral_window_halfwidth(h, w, config.beta);
    if (max_imag_residue) *max_imag_residue = 0.0;

    std::array<Plane, 3> out;
    if (b == 0) {
        // Empty window: the identity, bit-exact by construction.
        for (int c = 0; c < 3; ++c) out[c] = channel_plane(source, c);
        return out;
    }

    for (int c = 0; c < 3; ++c) {
        auto src_spec = fft2(channel_plane(source, c));
        const auto tgt_spec = fft2(channel_plane(target, c));
        for (int dy = -b; dy <= b; ++dy) {
            for (int dx = -b; dx <= b; ++dx) {
                // Shifted (centered) coordinate cy+dy maps to raw index (dy + h) % h.
                const int sy = (dy + h) % h;
                const int sx = (dx + w) % w;
                const std::size_t idx = static_cast<std::size_t>(sy) * w + sx;
                const double target_amp = std::abs(tgt_spec[idx]);
                const double source_amp = std::abs(src_spec[idx]);
                if (source_amp > 0.0) {
                    src_spec[idx] *= target_amp / source_amp;
                } else {
                    // Zero source amplitude carries no phase; adopt the target
                    // amplitude with zero phase.
                    src_spec[idx] = {target_amp, 0.0};
                }
            }
        }
        const auto complex_out = ifft2(src_spec, h, w);
        out[c] = Plane(h, w);
        for (std::size_t i = 0; i < complex_out.size(); ++i) {
            out[c].v[i] = complex_out[i].real();
            if (max_imag_residue) {
                const double residue = std::abs(complex_out[i].imag()) / 255.0;
                if (residue > *max_imag_residue) *max_imag_residue = residue;
            }
        }
    }
    return out;
}

Image8 spectral_blend(const Image8& source, const Image8& target, const SpectralConfig& config) {
    const int b = spectral_window_halfwidth(source.height, source.width, config.beta);
    if (b == 0 && source.height == target.height && source.width == target.width) return source;

    const auto planes = spectral_blend_channels(source, target, config);
    Image8 out(source.height, source.width);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < out.height; ++y) {
            for (int x = 0; x < out.width; ++x) {
                double v = planes[c].at(y, x);
                v = v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v);
                out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v));
            }
        }
    }
    return out;
}

DatasetManifest batch_stylize(const DatasetManifest& source, const DatasetManifest& target_pool,
                              const SpectralConfig& config, const std::filesystem::path& out_dir) {
    if (target_pool.samples.empty()) throw ArgumentError("batch_stylize: target pool is empty");

    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    std::filesystem::create_directories(out_dir / "masks", ec);
    if (!std::filesystem::is_directory(out_dir / "images") || !std::filesystem::is_directory(out_dir / "masks"))
        throw IoError("cannot create output directory: " + out_dir.string());

    // "fixed" sampling picks one pool target for the whole batch.
    std::size_t fixed_index = 0;
    if (config.target_sampling == TargetSampling::fixed)
        fixed_index = Rng(derive_seed(config.seed, "stylize_fixed_target")).below(target_pool.samples.size());

    DatasetManifest out = source;
    out.name = source.name + "_stylized";
    out.samples.clear();
    for (const auto& rec : source.samples) {
        std::size_t target_index = fixed_index;
        if (config.target_sampling == TargetSampling::random_per_image)
            target_index = Rng(derive_seed(config.seed, rec.sample_id)).below(target_pool.samples.size());

        const Image8 src_image = read_image_rgb8(rec.image_path);
        Image8 tgt_image = read_image_rgb8(target_pool.samples[target_index].image_path);
        if (tgt_image.height != src_image.height || tgt_image.width != src_image.width)
            tgt_image = resize_bilinear(tgt_image, src_image.height, src_image.width);
        const Image8 stylized = spectral_blend(src_image, tgt_image, config);

        SampleRecord out_rec = rec;
        out_rec.image_path = out_dir / "images" / (rec.sample_id + ".png");
        out_rec.mask_path = out_dir / "masks" / (rec.sample_id + ".png");
        write_image_rgb8(out_rec.image_path, stylized);
        write_mask_gray8(out_rec.mask_path, read_mask_gray8(rec.mask_path));
        out.samples.push_back(std::move(out_rec));
    }
    save_manifest(out, out_dir / "manifest.json");
    return out;
}

}  // namespace irbseg
