#include "irbseg/blend.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "irbseg/rng.hpp"
#include "serialize.hpp"

namespace irbseg {

using nlohmann::json;

std::string to_string(InitialMode m) {
    switch (m) {
        case InitialMode::random: return "random";
        case InitialMode::uniform: return "uniform";
        default: return "explicit";
    }
}

InitialMode initial_mode_from_string(const std::string& s) {
    if (s == "random") return InitialMode::random;
    if (s == "uniform") return InitialMode::uniform;
    if (s == "explicit") return InitialMode::explicit_counts;
    throw ValidationError("unknown initial mode: " + s);
}

int BlendAllocation::total() const {
    int sum = 0;
    for (const auto& [_, count] : per_class_counts) sum += count;
    return sum;
}

std::vector<int> rank_classes(const std::map<int, double>& foreground_iou) {
    return rank_worst_to_best(foreground_iou);
}

namespace {

// Digit string for "N-abc": the ratio weight each foreground class received,
// listed in class-id order. Weights above 9 are joined with dots.
std::string allocation_label(int budget, const std::map<int, int>& class_weights) {
    bool single_digit = true;
    for (const auto& [_, w] : class_weights)
        if (w > 9) single_digit = false;
    std::string digits;
    for (const auto& [_, w] : class_weights) {
        if (!digits.empty() && !single_digit) digits += '.';
        digits += std::to_string(w);
    }
    return std::to_string(budget) + "-" + digits;
}

void check_budget(const BlendPolicy& policy) {
    if (policy.total_budget <= 0)
        throw ArgumentError("blend budget must be positive, got " + std::to_string(policy.total_budget));
}

}  // namespace

BlendAllocation allocate_blend(const BlendPolicy& policy, const std::vector<int>& ranking_worst_to_best,
                               const ClassSet& class_set) {
    check_budget(policy);
    const auto fg = class_set.foreground_ids();
    if (ranking_worst_to_best.size() != policy.ratio_weights.size())
        throw ArgumentError("ranking has " + std::to_string(ranking_worst_to_best.size()) + " classes but " +
                            std::to_string(policy.ratio_weights.size()) + " ratio weights are configured");
    if (std::set<int>(ranking_worst_to_best.begin(), ranking_worst_to_best.end()) != std::set<int>(fg.begin(), fg.end()))
        throw ArgumentError("ranking is not a permutation of the foreground class ids");
    for (int w : policy.ratio_weights)
        if (w <= 0) throw ArgumentError("ratio weights must be positive");

    const int weight_sum = std::accumulate(policy.ratio_weights.begin(), policy.ratio_weights.end(), 0);
    const int n = policy.total_budget;

    // Largest remainder in exact integer arithmetic: class i's share is
    // n*w_i / weight_sum; leftovers go to the largest remainders, ties to the
    // worse-ranked class.
    struct Entry {
        int class_id;
        int rank_pos;  // 0 = worst
        int base;
        int remainder;  // n*w mod weight_sum
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < ranking_worst_to_best.size(); ++i) {
        const int units = n * policy.ratio_weights[i];
        entries.push_back({ranking_worst_to_best[i], static_cast<int>(i), units / weight_sum, units % weight_sum});
    }
    int leftover = n;
    for (const auto& e : entries) leftover -= e.base;
    std::vector<int> order(entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (entries[a].remainder != entries[b].remainder) return entries[a].remainder > entries[b].remainder;
        return entries[a].rank_pos < entries[b].rank_pos;
    });

    BlendAllocation alloc;
    std::map<int, int> weights_by_class;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        alloc.per_class_counts[entries[i].class_id] = entries[i].base;
        weights_by_class[entries[i].class_id] = policy.ratio_weights[entries[i].rank_pos];
    }
    for (int i = 0; leftover > 0; ++i, --leftover) ++alloc.per_class_counts[entries[order[static_cast<std::size_t>(i)]].class_id];
    alloc.label = allocation_label(n, weights_by_class);
    return alloc;
}

BlendAllocation uniform_allocation(const BlendPolicy& policy, const ClassSet& class_set) {
    check_budget(policy);
    const auto fg = class_set.foreground_ids();
    if (fg.empty()) throw ArgumentError("class set has no foreground classes");
    BlendAllocation alloc;
    const int k = static_cast<int>(fg.size());
    const int base = policy.total_budget / k;
    int leftover = policy.total_budget % k;
    for (int id : fg) {
        alloc.per_class_counts[id] = base + (leftover > 0 ? 1 : 0);
        if (leftover > 0) --leftover;
    }
    alloc.label = std::to_string(policy.total_budget) + "-u";
    return alloc;
}

std::vector<SampleRecord> select_blend_images(const DatasetManifest& pool, const BlendAllocation& allocation,
                                              std::uint64_t seed) {
    // Buckets keyed by dominant foreground class, in pool order. Samples with
    // no foreground pixels belong to no bucket and are never selected.
    std::map<int, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < pool.samples.size(); ++i) {
        const auto dominant = dominant_foreground_class(pool.samples[i], pool.class_set);
        if (dominant) buckets[*dominant].push_back(i);
    }

    std::vector<SampleRecord> selected;
    for (const auto& [class_id, need] : allocation.per_class_counts) {
        if (need == 0) continue;
        auto indices = buckets[class_id];
        if (static_cast<int>(indices.size()) < need)
            throw CapacityError("class " + pool.class_set.at(class_id).name + ": allocation asks for " +
                                std::to_string(need) + " images but the pool bucket holds " +
                                std::to_string(indices.size()) + " (short by " +
                                std::to_string(need - static_cast<int>(indices.size())) + ")");
        Rng rng(derive_seed(seed, "select_blend", static_cast<std::uint64_t>(class_id)));
        rng.shuffle(indices);
        for (int k = 0; k < need; ++k) selected.push_back(pool.samples[indices[static_cast<std::size_t>(k)]]);
    }
    return selected;
}

DatasetManifest build_blended_trainset(const DatasetManifest& source, const std::vector<SampleRecord>& blended,
                                       bool stylize, const StylizeSettings* settings) {
    DatasetManifest base = source;
    if (stylize) {
        if (!settings || !settings->target_pool)
            throw ArgumentError("build_blended_trainset: stylize requested without stylize settings");
        base = batch_stylize(source, *settings->target_pool, settings->config, settings->out_dir);
    }

    DatasetManifest out = base;
    out.name = source.name + "_blend";
    out.split = Split::train;
    std::unordered_set<std::string> ids;
    for (const auto& rec : out.samples) ids.insert(rec.sample_id);
    for (const auto& rec : blended) {
        if (!ids.insert(rec.sample_id).second)
            throw BuildError("blended trainset: duplicate sample_id " + rec.sample_id);
        out.samples.push_back(rec);
    }
    return out;
}

const IrbIteration& IrbRunState::best_iteration() const {
    if (best < 0 || best >= static_cast<int>(iterations.size()))
        throw EvaluationError("run state has no best iteration");
    return iterations[static_cast<std::size_t>(best)];
}

namespace {

BlendAllocation initial_allocation(const BlendPolicy& policy, const DatasetManifest& pool, const ClassSet& class_set,
                                   std::vector<SampleRecord>* selected_out) {
    check_budget(policy);
    switch (policy.initial_mode) {
        case InitialMode::uniform: {
            return uniform_allocation(policy, class_set);
        }
        case InitialMode::explicit_counts: {
            BlendAllocation alloc;
            alloc.per_class_counts = policy.explicit_counts;
            if (alloc.total() != policy.total_budget)
                throw ArgumentError("explicit allocation sums to " + std::to_string(alloc.total()) + ", budget is " +
                                    std::to_string(policy.total_budget));
            alloc.label = std::to_string(policy.total_budget) + "-e";
            return alloc;
        }
        case InitialMode::random:
        default: {
            // Draw the budget uniformly from the blendable pool; the realized
            // allocation is whatever dominant classes the draw happens to hit.
            std::vector<std::size_t> indices;
            for (std::size_t i = 0; i < pool.samples.size(); ++i)
                if (dominant_foreground_class(pool.samples[i], class_set)) indices.push_back(i);
            if (static_cast<int>(indices.size()) < policy.total_budget)
                throw CapacityError("random blend: pool has " + std::to_string(indices.size()) +
                                    " usable images, budget is " + std::to_string(policy.total_budget));
            Rng rng(derive_seed(policy.seed, "select_random_initial"));
            rng.shuffle(indices);
            BlendAllocation alloc;
            for (int id : class_set.foreground_ids()) alloc.per_class_counts[id] = 0;
            for (int k = 0; k < policy.total_budget; ++k) {
                const auto& rec = pool.samples[indices[static_cast<std::size_t>(k)]];
                ++alloc.per_class_counts[*dominant_foreground_class(rec, class_set)];
                if (selected_out) selected_out->push_back(rec);
            }
            alloc.label = std::to_string(policy.total_budget) + "-r";
            return alloc;
        }
    }
}

}  // namespace

IrbRunState irb_loop(const BlendPolicy& policy, const DatasetManifest& source, const DatasetManifest& target_pool,
                     const DatasetManifest& target_val, const TrainEvalFn& train_eval, const IrbOptions& options) {
    if (options.max_iterations <= 0) throw ArgumentError("irb_loop: max_iterations must be positive");
    if (!(source.class_set == target_pool.class_set) || !(source.class_set == target_val.class_set))
        throw ContractError("irb_loop: source, pool and validation set must share one class set");
    {
        std::unordered_set<std::string> val_ids;
        for (const auto& rec : target_val.samples) val_ids.insert(rec.sample_id);
        for (const auto& rec : target_pool.samples)
            if (val_ids.count(rec.sample_id))
                throw ArgumentError("irb_loop: sample " + rec.sample_id + " appears in both pool and validation set");
    }

    // Sources are stylized once per run; the result is reused across
    // iterations (the transform does not depend on the allocation).
    const DatasetManifest* train_source = &source;
    DatasetManifest stylized;
    if (options.stylize) {
        StylizeSettings settings{options.spectral, &target_pool, options.work_dir / "stylized"};
        stylized = batch_stylize(source, *settings.target_pool, settings.config, settings.out_dir);
        train_source = &stylized;
    }

    IrbRunState state;
    state.policy = policy;

    std::vector<SampleRecord> selected;
    BlendAllocation alloc = initial_allocation(policy, target_pool, source.class_set, &selected);

    for (int iteration = 0; iteration < options.max_iterations; ++iteration) {
        if (iteration > 0 || policy.initial_mode != InitialMode::random) {
            selected = select_blend_images(target_pool, alloc,
                                           derive_seed(policy.seed, "iteration", static_cast<std::uint64_t>(iteration)));
        }
        const DatasetManifest trainset = build_blended_trainset(*train_source, selected, false, nullptr);

        IoUReport report;
        std::string checkpoint;
        try {
            std::tie(report, checkpoint) = train_eval(trainset, target_val, iteration);
        } catch (const std::exception& e) {
            throw LoopError("irb_loop: trainer failed at iteration " + std::to_string(iteration) + ": " + e.what(),
                            iteration, state);
        }
        state.iterations.push_back({alloc, report, checkpoint});
        if (state.best < 0 || report.miou > state.iterations[static_cast<std::size_t>(state.best)].report.miou)
            state.best = iteration;

        const std::vector<int>& ranking = report.ranking_worst_to_best;
        if (std::find(state.rankings_seen.begin(), state.rankings_seen.end(), ranking) != state.rankings_seen.end())
            break;  // no new IoU ranking
        state.rankings_seen.push_back(ranking);
        alloc = allocate_blend(policy, ranking, source.class_set);
        selected.clear();
    }
    return state;
}

void save_run_state(const IrbRunState& state, const std::filesystem::path& path) {
    using detail::int_map_to_json;
    json doc;
    doc["policy"] = {{"total_budget", state.policy.total_budget},
                     {"ratio_weights", state.policy.ratio_weights},
                     {"initial_mode", to_string(state.policy.initial_mode)},
                     {"seed", state.policy.seed}};
    if (!state.policy.explicit_counts.empty())
        doc["policy"]["explicit_counts"] = int_map_to_json(state.policy.explicit_counts);
    doc["class_set"] = detail::class_set_to_json(state.class_set);
    doc["iterations"] = json::array();
    for (const auto& it : state.iterations) {
        doc["iterations"].push_back({{"allocation",
                                      {{"label", it.allocation.label},
                                       {"per_class_counts", int_map_to_json(it.allocation.per_class_counts)}}},
                                     {"report", detail::report_to_json(it.report)},
                                     {"checkpoint", it.checkpoint}});
    }
    doc["rankings_seen"] = state.rankings_seen;
    doc["best"] = state.best;

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write run state: " + path.string());
    out << doc.dump(2) << "\n";
}

IrbRunState load_run_state(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open run state: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw LoadError("run state is not valid JSON: " + path.string() + " (" + e.what() + ")");
    }
    IrbRunState state;
    const auto& p = doc.at("policy");
    state.policy.total_budget = p.at("total_budget").get<int>();
    state.policy.ratio_weights = p.at("ratio_weights").get<std::vector<int>>();
    state.policy.initial_mode = initial_mode_from_string(p.at("initial_mode").get<std::string>());
    state.policy.seed = p.at("seed").get<std::uint64_t>();
    if (p.contains("explicit_counts"))
        state.policy.explicit_counts = detail::int_map_from_json<int>(p.at("explicit_counts"));
    state.class_set = detail::class_set_from_json(doc.at("class_set"));
    for (const auto& it : doc.at("iterations")) {
        IrbIteration iter;
        iter.allocation.label = it.at("allocation").at("label").get<std::string>();
        iter.allocation.per_class_counts = detail::int_map_from_json<int>(it.at("allocation").at("per_class_counts"));
        iter.report = detail::report_from_json(it.at("report"));
        iter.checkpoint = it.at("checkpoint").get<std::string>();
        state.iterations.push_back(std::move(iter));
    }
    state.rankings_seen = doc.at("rankings_seen").get<std::vector<std::vector<int>>>();
    state.best = doc.at("best").get<int>();
    return state;
}

}  // namespace irbseg
