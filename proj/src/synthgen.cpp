#include "irbseg/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "irbseg/errors.hpp"
#include "irbseg/rng.hpp"

namespace irbseg {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool in_triangle(double y, double x, double ay, double ax, double by, double bx, double cy, double cx) {
    auto side = [](double py, double px, double y0, double x0, double y1, double x1) {
        return (px - x1) * (y0 - y1) - (x0 - x1) * (py - y1);
    };
    const double d1 = side(y, x, ay, ax, by, bx);
    const double d2 = side(y, x, by, bx, cy, cx);
    const double d3 = side(y, x, cy, cx, ay, ax);
    const bool has_neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
    const bool has_pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
    return !(has_neg && has_pos);
}

bool in_teardrop(double y, double x, const EllipseGeom& head, double tail) {
    if (head.contains(y, x)) return true;
    const double apex_y = head.cy + tail * head.ry;
    return in_triangle(y, x, head.cy, head.cx - 0.95 * head.rx, head.cy, head.cx + 0.95 * head.rx, apex_y, head.cx);
}

bool in_crescent(double y, double x, const EllipseGeom& main, const EllipseGeom& cut) {
    return main.contains(y, x) && !cut.contains(y, x);
}

EllipseGeom draw_ellipse(const ShapeSpec& shape, double scale, int h, int w, Rng& rng) {
    const double min_dim = static_cast<double>(std::min(h, w));
    const double size = shape.base_size * scale * (1.0 + shape.size_jitter * (2.0 * rng.next_double() - 1.0));
    const double aspect = 1.0 + shape.aspect_jitter * (2.0 * rng.next_double() - 1.0);
    const double cy = (shape.center_y + shape.center_jitter * (2.0 * rng.next_double() - 1.0)) * h;
    const double cx = (shape.center_x + shape.center_jitter * (2.0 * rng.next_double() - 1.0)) * w;
    EllipseGeom e;
    e.cy = cy;
    e.cx = cx;
    e.ry = std::max(1.0, size * min_dim / aspect);
    e.rx = std::max(1.0, size * min_dim * aspect);
    return e;
}

SampleGeometry draw_geometry(const SceneSpec& spec, int focus_class, std::uint64_t attempt_seed) {
    SampleGeometry geom;
    const ShapeSpec* shapes[3] = {&spec.glottis, &spec.epiglottis, &spec.uvula};
    for (int k = 0; k < 3; ++k) {
        Rng rng(derive_seed(attempt_seed, "geometry", static_cast<std::uint64_t>(k)));
        const bool focused = (k == focus_class);
        // The focus class is always present; the others follow their priors.
        geom.present[static_cast<std::size_t>(k)] = focused || rng.next_double() < spec.class_presence[static_cast<std::size_t>(k)];
        const double scale = spec.focus_scale == 1.0 ? 1.0 : (focused ? spec.focus_scale : 1.0 / spec.focus_scale);
        const EllipseGeom e = draw_ellipse(*shapes[k], scale, spec.image_height, spec.image_width, rng);
        if (k == 0) {
            geom.gl = e;
        } else if (k == 1) {
            geom.ep_main = e;
            geom.ep_cut = {e.cy - 0.5 * e.ry, e.cx, 0.85 * e.ry, 0.85 * e.rx};
        } else {
            geom.uv = e;
        }
    }
    return geom;
}

Mask8 rasterize(const SceneSpec& spec, const SampleGeometry& geom) {
    Mask8 mask(spec.image_height, spec.image_width, 0);
    for (int y = 0; y < spec.image_height; ++y) {
        for (int x = 0; x < spec.image_width; ++x) {
            const double py = y + 0.5, px = x + 0.5;
            std::uint8_t label = 0;
            if (geom.present[0] && geom.gl.contains(py, px)) label = 1;
            if (geom.present[1] && in_crescent(py, px, geom.ep_main, geom.ep_cut)) label = 2;
            if (geom.present[2] && in_teardrop(py, px, geom.uv, geom.uv_tail)) label = 3;
            mask.at(y, x) = label;
        }
    }
    return mask;
}

void hue_rotate(double& r, double& g, double& b, double cos_a, double sin_a) {
    const double third = 1.0 / 3.0;
    const double rt = std::sqrt(third) * sin_a;
    const double c0 = cos_a + (1.0 - cos_a) * third;
    const double c1 = third * (1.0 - cos_a) - rt;
    const double c2 = third * (1.0 - cos_a) + rt;
    const double nr = c0 * r + c1 * g + c2 * b;
    const double ng = c2 * r + c0 * g + c1 * b;
    const double nb = c1 * r + c2 * g + c0 * b;
    r = nr;
    g = ng;
    b = nb;
}

std::uint8_t clip_round(double v) {
    return static_cast<std::uint8_t>(std::lround(v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v)));
}

Image8 render_sim(const SceneSpec& spec, const Mask8& mask) {
    Image8 image(spec.image_height, spec.image_width);
    const double cy = spec.image_height / 2.0, cx = spec.image_width / 2.0;
    const double dmax2 = cy * cy + cx * cx;
    for (int y = 0; y < spec.image_height; ++y) {
        for (int x = 0; x < spec.image_width; ++x) {
            const auto& color = spec.sim.palette[mask.at(y, x)];
            double factor = 1.0;
            if (spec.sim.vignette_strength > 0.0) {
                const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                factor = 1.0 - spec.sim.vignette_strength * d2 / dmax2;
            }
            for (int c = 0; c < 3; ++c) image.at(y, x, c) = clip_round(color[static_cast<std::size_t>(c)] * factor);
        }
    }
    return image;
}

Image8 render_real(const SceneSpec& spec, const Mask8& mask, std::uint64_t style_seed) {
    Rng rng(derive_seed(style_seed, "real_style"));
    const double hue = spec.real.hue_shift_max_deg * (2.0 * rng.next_double() - 1.0) * kPi / 180.0;
    const double cos_a = std::cos(hue), sin_a = std::sin(hue);
    const double brightness = 1.0 + spec.real.brightness_jitter * (2.0 * rng.next_double() - 1.0);
    // Per-class sinusoidal texture parameters.
    double freq_y[4], freq_x[4], phase[4];
    for (int k = 0; k < 4; ++k) {
        freq_y[k] = rng.uniform(0.06, 0.20);
        freq_x[k] = rng.uniform(0.06, 0.20);
        phase[k] = rng.uniform(0.0, 2.0 * kPi);
    }

    Image8 image(spec.image_height, spec.image_width);
    for (int y = 0; y < spec.image_height; ++y) {
        for (int x = 0; x < spec.image_width; ++x) {
            const int label = mask.at(y, x);
            const auto& color = spec.real.palette[static_cast<std::size_t>(label)];
            const double tex =
                1.0 + 0.5 * spec.real.texture_strength *
                          std::sin(2.0 * kPi * (freq_y[label] * y + freq_x[label] * x) + phase[label]);
            double r = color[0] * tex, g = color[1] * tex, b = color[2] * tex;
            hue_rotate(r, g, b, cos_a, sin_a);
            r *= brightness;
            g *= brightness;
            b *= brightness;
            const double sigma = spec.real.noise_sigma * 255.0;
            image.at(y, x, 0) = clip_round(r + sigma * rng.normal());
            image.at(y, x, 1) = clip_round(g + sigma * rng.normal());
            image.at(y, x, 2) = clip_round(b + sigma * rng.normal());
        }
    }
    return image;
}

}  // namespace

RenderedSample render_sample(const SceneSpec& spec, Domain domain, int sample_index, std::uint64_t sample_seed) {
    if (spec.image_height < 8 || spec.image_width < 8) throw ArgumentError("scene image_size is too small");
    for (double p : spec.class_presence)
        if (p <= 0.0 || p > 1.0) throw ArgumentError("class presence probabilities must be in (0, 1]");

    const int focus_class = spec.focus_scale == 1.0 ? -1 : sample_index % 3;
    RenderedSample sample;
    // Re-draw until every present shape is visible (jitter or occlusion can
    // wipe a shape out); bounded so a degenerate spec fails loudly.
    for (int attempt = 0; attempt < 500; ++attempt) {
        sample.geometry = draw_geometry(spec, focus_class, derive_seed(sample_seed, "attempt",
                                                                        static_cast<std::uint64_t>(attempt)));
        sample.mask = rasterize(spec, sample.geometry);
        const auto hist = mask_histogram(sample.mask);
        bool ok = true;
        for (int k = 0; k < 3; ++k)
            if (sample.geometry.present[static_cast<std::size_t>(k)] && hist.count(k + 1) == 0) ok = false;
        if (ok) break;
        if (attempt == 499) throw Error("render_sample: could not place visible shapes; the scene spec is degenerate");
    }

    sample.image = domain == Domain::source_sim ? render_sim(spec, sample.mask)
                                                : render_real(spec, sample.mask, sample_seed);
    return sample;
}

std::pair<DatasetManifest, DatasetManifest> generate_domain_pair(const SceneSpec& spec, int n_sim, int n_real,
                                                                 const std::filesystem::path& out_dir) {
    if (n_sim <= 0 || n_real <= 0) throw ArgumentError("generate_domain_pair: sample counts must be positive");

    auto generate = [&](Domain domain, const char* tag, int count) {
        const std::filesystem::path root = out_dir / tag;
        std::error_code ec;
        std::filesystem::create_directories(root / "images", ec);
        std::filesystem::create_directories(root / "masks", ec);
        if (!std::filesystem::is_directory(root / "images") || !std::filesystem::is_directory(root / "masks"))
            throw IoError("cannot create dataset directory: " + root.string());

        DatasetManifest manifest;
        manifest.name = tag;
        manifest.domain = domain;
        manifest.split = Split::train;
        manifest.class_set = ClassSet::oropharyngeal();
        for (int i = 0; i < count; ++i) {
            char id[32];
            std::snprintf(id, sizeof(id), "%s_%03d", tag, i);
            const std::uint64_t sample_seed = derive_seed(spec.seed, tag, static_cast<std::uint64_t>(i));
            const RenderedSample rendered = render_sample(spec, domain, i, sample_seed);

            SampleRecord rec;
            rec.sample_id = id;
            rec.domain = domain;
            rec.image_path = root / "images" / (std::string(id) + ".png");
            rec.mask_path = root / "masks" / (std::string(id) + ".png");
            rec.class_histogram = mask_histogram(rendered.mask);
            write_image_rgb8(rec.image_path, rendered.image);
            write_mask_gray8(rec.mask_path, rendered.mask);
            manifest.samples.push_back(std::move(rec));
        }
        save_manifest(manifest, root / "manifest.json");
        return manifest;
    };

    DatasetManifest sim = generate(Domain::source_sim, "sim", n_sim);
    DatasetManifest real = generate(Domain::target_real, "real", n_real);
    return {std::move(sim), std::move(real)};
}

}  // namespace irbseg
