#include "irbseg/unet.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

#include "irbseg/errors.hpp"

namespace irbseg {

using nn::Tensor;

namespace {

void concat_channels(const Tensor& a, const Tensor& b, Tensor& out) {
    out.reshape(a.channels + b.channels, a.height, a.width);
    std::memcpy(out.v.data(), a.v.data(), a.v.size() * sizeof(float));
    std::memcpy(out.v.data() + a.v.size(), b.v.data(), b.v.size() * sizeof(float));
}

void split_channels(const Tensor& gcat, Tensor& ga, Tensor& gb, int a_channels) {
    ga.reshape(a_channels, gcat.height, gcat.width);
    gb.reshape(gcat.channels - a_channels, gcat.height, gcat.width);
    std::memcpy(ga.v.data(), gcat.v.data(), ga.v.size() * sizeof(float));
    std::memcpy(gb.v.data(), gcat.v.data() + ga.v.size(), gb.v.size() * sizeof(float));
}

void add_into(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

Tensor image_to_tensor(const Image8& image) {
    Tensor t(3, image.height, image.width);
    const std::size_t hw = image.pixels();
    for (int c = 0; c < 3; ++c) {
        float* plane = t.plane(c);
        for (std::size_t p = 0; p < hw; ++p) plane[p] = static_cast<float>(image.data[p * 3 + c]) / 255.0f;
    }
    return t;
}

}  // namespace

struct UnetModel::Workspace {
    Tensor input;
    std::array<std::vector<Tensor>, 4> enc_out;
    std::array<Tensor, 3> pooled;
    std::array<std::vector<std::uint8_t>, 3> pool_idx;
    std::array<Tensor, 3> up, cat;
    std::array<std::vector<Tensor>, 3> dec_out;
    Tensor logits;

    Tensor g_logits;
    std::array<std::vector<Tensor>, 4> g_enc_out;
    std::array<Tensor, 3> g_pooled;
    std::array<Tensor, 3> g_up, g_cat;
    std::array<std::vector<Tensor>, 3> g_dec_out;
    Tensor pool_scratch;
    std::vector<float> col, gcol;
};

UnetModel::UnetModel(int base_channels, int convs_per_stage) : base_(base_channels), repeats_(convs_per_stage) {
    if (base_ < 1) throw ArgumentError("unet: base_channels must be >= 1");
    if (repeats_ < 1 || repeats_ > 3) throw ArgumentError("unet: convs_per_stage must be in [1, 3]");
}

void UnetModel::initialize(int num_classes, std::uint64_t seed) {
    if (num_classes < 2) throw ArgumentError("unet: need at least 2 classes");
    num_classes_ = num_classes;
    std::uint64_t conv_index = 0;
    auto build_stage = [&](std::vector<nn::Conv2d>& stage, int in_c, int out_c) {
        stage.assign(static_cast<std::size_t>(repeats_), nn::Conv2d{});
        for (int j = 0; j < repeats_; ++j) {
            Rng rng(derive_seed(seed, "unet_init", conv_index++));
            stage[static_cast<std::size_t>(j)].build(j == 0 ? in_c : out_c, out_c, 3, rng);
        }
    };
    for (int s = 0; s < 4; ++s) build_stage(enc_[static_cast<std::size_t>(s)], s == 0 ? 3 : base_ << (s - 1), base_ << s);
    for (int d = 0; d < 3; ++d) {
        const int up_c = base_ << (3 - d);
        const int skip_c = base_ << (2 - d);
        build_stage(dec_[static_cast<std::size_t>(d)], up_c + skip_c, skip_c);
    }
    Rng rng(derive_seed(seed, "unet_init", conv_index++));
    head_.build(base_, num_classes_, 1, rng);
    initialized_ = true;
}

void UnetModel::require_initialized() const {
    if (!initialized_) throw ArgumentError("unet: model is not initialized");
}

std::vector<const nn::Conv2d*> UnetModel::flatten_order() const {
    std::vector<const nn::Conv2d*> order;
    for (const auto& stage : enc_)
        for (const auto& conv : stage) order.push_back(&conv);
    for (const auto& stage : dec_)
        for (const auto& conv : stage) order.push_back(&conv);
    order.push_back(&head_);
    return order;
}

std::vector<nn::Conv2d*> UnetModel::flatten_order() {
    std::vector<nn::Conv2d*> order;
    for (auto& stage : enc_)
        for (auto& conv : stage) order.push_back(&conv);
    for (auto& stage : dec_)
        for (auto& conv : stage) order.push_back(&conv);
    order.push_back(&head_);
    return order;
}

std::size_t UnetModel::parameter_count() const {
    std::size_t count = 0;
    for (const auto* conv : flatten_order()) count += conv->weight_count();
    return count;
}

void UnetModel::forward(const Tensor& input, Workspace& ws) const {
    auto run_stage = [&](const std::vector<nn::Conv2d>& stage, const Tensor& stage_input, std::vector<Tensor>& outs) {
        outs.resize(stage.size());
        const Tensor* cur = &stage_input;
        for (std::size_t j = 0; j < stage.size(); ++j) {
            stage[j].forward(*cur, outs[j], ws.col);
            nn::relu_inplace(outs[j]);
            cur = &outs[j];
        }
    };

    run_stage(enc_[0], input, ws.enc_out[0]);
    for (int s = 1; s < 4; ++s) {
        nn::maxpool2_forward(ws.enc_out[static_cast<std::size_t>(s - 1)].back(), ws.pooled[static_cast<std::size_t>(s - 1)],
                             ws.pool_idx[static_cast<std::size_t>(s - 1)]);
        run_stage(enc_[static_cast<std::size_t>(s)], ws.pooled[static_cast<std::size_t>(s - 1)],
                  ws.enc_out[static_cast<std::size_t>(s)]);
    }

    const Tensor* deep = &ws.enc_out[3].back();
    for (int d = 0; d < 3; ++d) {
        const std::size_t di = static_cast<std::size_t>(d);
        nn::upsample2_forward(*deep, ws.up[di]);
        concat_channels(ws.up[di], ws.enc_out[static_cast<std::size_t>(2 - d)].back(), ws.cat[di]);
        run_stage(dec_[di], ws.cat[di], ws.dec_out[di]);
        deep = &ws.dec_out[di].back();
    }
    head_.forward(*deep, ws.logits, ws.col);
}

void UnetModel::backward(Workspace& ws, float* grads) const {
    // Gradient block offsets follow flatten_order: enc stages, dec stages, head.
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const auto* conv : flatten_order()) {
        offsets.push_back(offset);
        offset += conv->weight_count();
    }
    std::size_t block = offsets.size();

    auto grad_ptrs = [&](std::size_t block_index) {
        float* gw = grads + offsets[block_index];
        return gw;  // biases start at gw + w.size()
    };

    for (int s = 0; s < 4; ++s)
        ws.g_enc_out[static_cast<std::size_t>(s)].resize(enc_[static_cast<std::size_t>(s)].size());
    for (int d = 0; d < 3; ++d)
        ws.g_dec_out[static_cast<std::size_t>(d)].resize(dec_[static_cast<std::size_t>(d)].size());

    // head
    --block;
    {
        float* gw = grad_ptrs(block);
        head_.backward(ws.dec_out[2].back(), ws.g_logits, ws.g_dec_out[2].back(), ws.col, ws.gcol, gw,
                       gw + head_.w.size(), true);
    }

    auto run_stage_backward = [&](const std::vector<nn::Conv2d>& stage, const Tensor& stage_input,
                                  const std::vector<Tensor>& outs, std::vector<Tensor>& g_outs, Tensor& g_stage_input,
                                  std::size_t first_block, bool want_input_grad) {
        for (int j = static_cast<int>(stage.size()) - 1; j >= 0; --j) {
            const std::size_t ji = static_cast<std::size_t>(j);
            nn::relu_backward_inplace(outs[ji], g_outs[ji]);
            const Tensor& in_j = (j == 0) ? stage_input : outs[ji - 1];
            Tensor& gx = (j == 0) ? g_stage_input : g_outs[ji - 1];
            float* gw = grad_ptrs(first_block + ji);
            const bool want = (j > 0) || want_input_grad;
            stage[ji].backward(in_j, g_outs[ji], gx, ws.col, ws.gcol, gw, gw + stage[ji].w.size(), want);
        }
    };

    // Decoder, shallowest first. The stage's input gradient (g_cat) splits
    // into the upsample branch and the skip connection.
    for (int d = 2; d >= 0; --d) {
        const std::size_t di = static_cast<std::size_t>(d);
        std::size_t first_block = static_cast<std::size_t>(4 * repeats_) + di * static_cast<std::size_t>(repeats_);
        run_stage_backward(dec_[di], ws.cat[di], ws.dec_out[di], ws.g_dec_out[di], ws.g_cat[di], first_block, true);

        Tensor& g_skip = ws.g_enc_out[static_cast<std::size_t>(2 - d)].back();
        split_channels(ws.g_cat[di], ws.g_up[di], g_skip, ws.up[di].channels);

        if (d == 0) {
            Tensor& g_deep = ws.g_enc_out[3].back();
            g_deep.reshape(ws.enc_out[3].back().channels, ws.enc_out[3].back().height, ws.enc_out[3].back().width);
            nn::upsample2_backward(ws.g_up[di], g_deep);
        } else {
            Tensor& g_prev = ws.g_dec_out[static_cast<std::size_t>(d - 1)].back();
            const Tensor& prev = ws.dec_out[static_cast<std::size_t>(d - 1)].back();
            g_prev.reshape(prev.channels, prev.height, prev.width);
            nn::upsample2_backward(ws.g_up[di], g_prev);
        }
    }

    // Encoder, deepest first; pooling gradients add to the skip gradients
    // already collected from the decoder.
    for (int s = 3; s >= 0; --s) {
        const std::size_t si = static_cast<std::size_t>(s);
        const Tensor& stage_input = (s == 0) ? ws.input : ws.pooled[static_cast<std::size_t>(s - 1)];
        Tensor& g_stage_input = (s == 0) ? ws.pool_scratch : ws.g_pooled[static_cast<std::size_t>(s - 1)];
        run_stage_backward(enc_[si], stage_input, ws.enc_out[si], ws.g_enc_out[si], g_stage_input,
                           si * static_cast<std::size_t>(repeats_), s != 0);
        if (s > 0) {
            nn::maxpool2_backward(ws.g_pooled[static_cast<std::size_t>(s - 1)], ws.pool_idx[static_cast<std::size_t>(s - 1)],
                                  ws.pool_scratch);
            add_into(ws.g_enc_out[static_cast<std::size_t>(s - 1)].back(), ws.pool_scratch);
        }
    }
}

namespace {

struct LoadedSample {
    Tensor image;
    std::vector<std::uint8_t> mask;
};

}  // namespace

std::vector<double> UnetModel::fit(const DatasetManifest& trainset, const TrainerConfig& config) {
    require_initialized();
    validate_trainer_config(config);
    if (trainset.samples.empty()) throw ArgumentError("fit: trainset is empty");
    if (trainset.class_set.size() != num_classes_)
        throw ContractError("fit: model has " + std::to_string(num_classes_) + " classes but trainset declares " +
                            std::to_string(trainset.class_set.size()));

    const int h = config.image_height, w = config.image_width;
    std::vector<LoadedSample> data;
    data.reserve(trainset.samples.size());
    for (const auto& rec : trainset.samples) {
        Image8 image = read_image_rgb8(rec.image_path);
        Mask8 mask = read_mask_gray8(rec.mask_path);
        if (image.height != h || image.width != w) image = resize_bilinear(image, h, w);
        if (mask.height != h || mask.width != w) mask = resize_nearest(mask, h, w);
        for (std::uint8_t v : mask.data)
            if (v >= num_classes_)
                throw ValidationError("fit: sample " + rec.sample_id + " has mask value " +
                                      std::to_string(static_cast<int>(v)) + " outside the class set");
        data.push_back({image_to_tensor(image), std::move(mask.data)});
    }

    const std::size_t n = data.size();
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);
    const std::size_t param_count = parameter_count();

    auto convs = flatten_order();
    std::vector<std::size_t> offsets;
    {
        std::size_t off = 0;
        for (auto* conv : convs) {
            offsets.push_back(off);
            off += conv->weight_count();
        }
    }

    unsigned hw_threads = std::thread::hardware_concurrency();
    if (hw_threads == 0) hw_threads = 1;
    const std::size_t threads = std::min<std::size_t>({hw_threads, batch, 4});

    // One gradient buffer per batch slot: summed in slot order after the
    // parallel section, so results do not depend on the thread count.
    std::vector<std::vector<float>> slot_grads(batch, std::vector<float>(param_count, 0.0f));
    std::vector<double> slot_loss(batch, 0.0);
    std::vector<float> total_grad(param_count, 0.0f);
    std::vector<Workspace> workspaces(threads);

    nn::Adam adam(param_count, config.learning_rate);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> log;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t bn = std::min(batch, n - start);
            std::atomic<std::size_t> cursor{0};
            auto worker = [&](std::size_t tid) {
                Workspace& ws = workspaces[tid];
                for (std::size_t i = cursor.fetch_add(1); i < bn; i = cursor.fetch_add(1)) {
                    const LoadedSample& sample = data[order[start + i]];
                    std::fill(slot_grads[i].begin(), slot_grads[i].end(), 0.0f);
                    forward(sample.image, ws);
                    ws.input = sample.image;  // stage-0 backward reads the input
                    slot_loss[i] = nn::softmax_ce_loss(ws.logits, sample.mask.data(), ws.g_logits);
                    backward(ws, slot_grads[i].data());
                }
            };
            if (threads == 1) {
                worker(0);
            } else {
                std::vector<std::thread> pool;
                for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
                for (auto& t : pool) t.join();
            }

            std::fill(total_grad.begin(), total_grad.end(), 0.0f);
            for (std::size_t i = 0; i < bn; ++i) {
                const float* g = slot_grads[i].data();
                for (std::size_t p = 0; p < param_count; ++p) total_grad[p] += g[p];
                epoch_loss += slot_loss[i];
            }
            const float scale = 1.0f / static_cast<float>(bn);
            for (auto& g : total_grad) g *= scale;

            adam.begin_step();
            for (std::size_t ci = 0; ci < convs.size(); ++ci) {
                nn::Conv2d* conv = convs[ci];
                adam.update(conv->w.data(), total_grad.data() + offsets[ci], conv->w.size(), offsets[ci]);
                adam.update(conv->b.data(), total_grad.data() + offsets[ci] + conv->w.size(), conv->b.size(),
                            offsets[ci] + conv->w.size());
            }
        }
        const double mean_loss = epoch_loss / static_cast<double>(n);
        if (!std::isfinite(mean_loss))
            throw DivergenceError("fit: non-finite loss at epoch " + std::to_string(epoch), epoch);
        log.push_back(mean_loss);
    }
    return log;
}

Mask8 UnetModel::predict(const Image8& image) const {
    require_initialized();
    if (image.height <= 0 || image.width <= 0) throw ArgumentError("predict: empty image");
    if (image.height % downsampling_factor() != 0 || image.width % downsampling_factor() != 0)
        throw ArgumentError("predict: image size " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                            " is not divisible by the downsampling factor " + std::to_string(downsampling_factor()));
    Workspace ws;
    const Tensor input = image_to_tensor(image);
    forward(input, ws);
    Mask8 mask(image.height, image.width);
    nn::argmax_channels(ws.logits, mask.data.data());
    return mask;
}

void UnetModel::save_weights(const std::filesystem::path& file) const {
    require_initialized();
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write weights: " + file.string());
    const std::uint32_t magic = 0x49524253;  // "IRBS"
    const std::uint32_t version = 1;
    auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    auto put_i32 = [&](std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    put_u32(magic);
    put_u32(version);
    put_i32(base_);
    put_i32(repeats_);
    put_i32(num_classes_);
    for (const auto* conv : flatten_order()) {
        put_i32(conv->in_c);
        put_i32(conv->out_c);
        put_i32(conv->k);
        const std::uint64_t wn = conv->w.size(), bn = conv->b.size();
        out.write(reinterpret_cast<const char*>(&wn), sizeof(wn));
        out.write(reinterpret_cast<const char*>(conv->w.data()), static_cast<std::streamsize>(wn * sizeof(float)));
        out.write(reinterpret_cast<const char*>(&bn), sizeof(bn));
        out.write(reinterpret_cast<const char*>(conv->b.data()), static_cast<std::streamsize>(bn * sizeof(float)));
    }
    if (!out) throw IoError("short write to " + file.string());
}

void UnetModel::load_weights(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw LoadError("cannot open weights: " + file.string());
    auto get_u32 = [&] {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        return v;
    };
    auto get_i32 = [&] {
        std::int32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        return v;
    };
    if (get_u32() != 0x49524253 || get_u32() != 1) throw LoadError("not an irbseg weights file: " + file.string());
    base_ = get_i32();
    repeats_ = get_i32();
    const int classes = get_i32();
    if (base_ < 1 || repeats_ < 1 || repeats_ > 3 || classes < 2)
        throw LoadError("corrupt weights header in " + file.string());
    initialize(classes, 0);  // builds the architecture; weights are overwritten below
    for (auto* conv : flatten_order()) {
        const int in_c = get_i32(), out_c = get_i32(), k = get_i32();
        if (in_c != conv->in_c || out_c != conv->out_c || k != conv->k)
            throw LoadError("weights shape mismatch in " + file.string());
        std::uint64_t wn = 0, bn = 0;
        in.read(reinterpret_cast<char*>(&wn), sizeof(wn));
        if (wn != conv->w.size()) throw LoadError("weights size mismatch in " + file.string());
        in.read(reinterpret_cast<char*>(conv->w.data()), static_cast<std::streamsize>(wn * sizeof(float)));
        in.read(reinterpret_cast<char*>(&bn), sizeof(bn));
        if (bn != conv->b.size()) throw LoadError("bias size mismatch in " + file.string());
        in.read(reinterpret_cast<char*>(conv->b.data()), static_cast<std::streamsize>(bn * sizeof(float)));
    }
    if (!in) throw LoadError("truncated weights file: " + file.string());
}

}  // namespace irbseg
