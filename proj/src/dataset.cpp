#include "irbseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "irbseg/errors.hpp"
#include "irbseg/rng.hpp"

namespace irbseg {

using nlohmann::json;

ClassSet::ClassSet(std::vector<ClassInfo> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw ValidationError("class set must not be empty");
    std::unordered_set<std::string> names;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].id != static_cast<int>(i))
            throw ValidationError("class ids must be consecutive from 0, got id " + std::to_string(entries_[i].id) +
                                  " at position " + std::to_string(i));
        if (!names.insert(entries_[i].name).second)
            throw ValidationError("duplicate class name: " + entries_[i].name);
    }
    if (entries_[0].is_foreground) throw ValidationError("class id 0 must be background");
}

ClassSet ClassSet::oropharyngeal() {
    return ClassSet({{0, "BG", false}, {1, "GL", true}, {2, "EP", true}, {3, "UV", true}});
}

const ClassInfo& ClassSet::at(int id) const {
    if (!valid_id(id)) throw ArgumentError("class id out of range: " + std::to_string(id));
    return entries_[static_cast<std::size_t>(id)];
}

std::vector<int> ClassSet::foreground_ids() const {
    std::vector<int> ids;
    for (const auto& e : entries_)
        if (e.is_foreground) ids.push_back(e.id);
    return ids;
}

std::optional<int> ClassSet::id_of(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.id;
    return std::nullopt;
}

std::string to_string(Domain d) { return d == Domain::source_sim ? "source_sim" : "target_real"; }
std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

Domain domain_from_string(const std::string& s) {
    if (s == "source_sim") return Domain::source_sim;
    if (s == "target_real") return Domain::target_real;
    throw ValidationError("unknown domain: " + s);
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ValidationError("unknown split: " + s);
}

std::map<int, std::uint64_t> mask_histogram(const Mask8& mask) {
    std::map<int, std::uint64_t> hist;
    for (std::uint8_t v : mask.data) ++hist[v];
    return hist;
}

namespace {

json histogram_to_json(const std::map<int, std::uint64_t>& hist) {
    json obj = json::object();
    for (const auto& [id, count] : hist) obj[std::to_string(id)] = count;
    return obj;
}

std::map<int, std::uint64_t> histogram_from_json(const json& obj) {
    std::map<int, std::uint64_t> hist;
    for (auto it = obj.begin(); it != obj.end(); ++it)
        hist[std::stoi(it.key())] = it.value().get<std::uint64_t>();
    return hist;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open manifest: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw LoadError("manifest is not valid JSON: " + path.string() + " (" + e.what() + ")");
    }

    DatasetManifest manifest;
    try {
        manifest.name = doc.at("name").get<std::string>();
        manifest.domain = domain_from_string(doc.at("domain").get<std::string>());
        manifest.split = split_from_string(doc.at("split").get<std::string>());
        std::vector<ClassInfo> entries;
        for (const auto& c : doc.at("class_set"))
            entries.push_back({c.at("id").get<int>(), c.at("name").get<std::string>(), c.at("is_foreground").get<bool>()});
        manifest.class_set = ClassSet(std::move(entries));
    } catch (const json::exception& e) {
        throw LoadError("manifest " + path.string() + " is missing required fields: " + e.what());
    }

    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::unordered_set<std::string> seen_ids;
    for (const auto& s : doc.at("samples")) {
        SampleRecord rec;
        rec.sample_id = s.at("sample_id").get<std::string>();
        if (!seen_ids.insert(rec.sample_id).second)
            throw ValidationError("duplicate sample_id in manifest: " + rec.sample_id);
        std::filesystem::path image_rel = s.at("image").get<std::string>();
        std::filesystem::path mask_rel = s.at("mask").get<std::string>();
        rec.image_path = image_rel.is_absolute() ? image_rel : base / image_rel;
        rec.mask_path = mask_rel.is_absolute() ? mask_rel : base / mask_rel;
        rec.domain = s.contains("domain") ? domain_from_string(s.at("domain").get<std::string>()) : manifest.domain;

        if (!std::filesystem::exists(rec.image_path)) throw LoadError("missing image file: " + rec.image_path.string());
        if (!std::filesystem::exists(rec.mask_path)) throw LoadError("missing mask file: " + rec.mask_path.string());
        const Image8 image = read_image_rgb8(rec.image_path);
        const Mask8 mask = read_mask_gray8(rec.mask_path);
        if (image.height != mask.height || image.width != mask.width)
            throw ValidationError("sample " + rec.sample_id + ": image is " + std::to_string(image.height) + "x" +
                                  std::to_string(image.width) + " but mask is " + std::to_string(mask.height) + "x" +
                                  std::to_string(mask.width));
        for (std::uint8_t v : mask.data)
            if (!manifest.class_set.valid_id(v))
                throw ValidationError("sample " + rec.sample_id + ": mask contains invalid class id " +
                                      std::to_string(static_cast<int>(v)));
        rec.class_histogram = mask_histogram(mask);
        if (s.contains("class_histogram")) {
            const auto cached = histogram_from_json(s.at("class_histogram"));
            if (cached != rec.class_histogram)
                throw ValidationError("sample " + rec.sample_id + ": cached class_histogram does not match mask pixels");
        }
        manifest.samples.push_back(std::move(rec));
    }
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    json doc;
    doc["name"] = manifest.name;
    doc["domain"] = to_string(manifest.domain);
    doc["split"] = to_string(manifest.split);
    doc["class_set"] = json::array();
    for (const auto& e : manifest.class_set.entries())
        doc["class_set"].push_back({{"id", e.id}, {"name", e.name}, {"is_foreground", e.is_foreground}});

    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    doc["samples"] = json::array();
    for (const auto& rec : manifest.samples) {
        json s;
        s["sample_id"] = rec.sample_id;
        const auto image_rel = rec.image_path.lexically_proximate(base);
        const auto mask_rel = rec.mask_path.lexically_proximate(base);
        s["image"] = image_rel.generic_string();
        s["mask"] = mask_rel.generic_string();
        if (!rec.class_histogram.empty()) s["class_histogram"] = histogram_to_json(rec.class_histogram);
        // Samples carry an explicit domain only when it differs from the
        // manifest's (blended trainsets mix domains).
        if (rec.domain != manifest.domain) s["domain"] = to_string(rec.domain);
        doc["samples"].push_back(std::move(s));
    }

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << doc.dump(2) << "\n";
}

std::optional<int> dominant_foreground_class(const SampleRecord& sample, const ClassSet& class_set) {
    if (sample.class_histogram.empty())
        throw ArgumentError("sample " + sample.sample_id + " has no computed class_histogram");
    std::optional<int> best;
    std::uint64_t best_count = 0;
    for (int id : class_set.foreground_ids()) {
        const auto it = sample.class_histogram.find(id);
        const std::uint64_t count = it == sample.class_histogram.end() ? 0 : it->second;
        if (count > best_count) {
            best = id;
            best_count = count;
        }
    }
    return best;  // ties resolve to the smaller id because ids iterate ascending
}

std::array<DatasetManifest, 3> split_dataset(const DatasetManifest& manifest, const SplitFractions& fractions,
                                             std::uint64_t seed) {
    const double fr[3] = {fractions.train, fractions.val, fractions.test};
    for (double f : fr)
        if (f < 0.0) throw ArgumentError("split fractions must be non-negative");
    const double sum = fr[0] + fr[1] + fr[2];
    if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("split fractions must sum to 1, got " + std::to_string(sum));

    const std::size_t n = manifest.samples.size();
    // Largest-remainder rounding; remainder ties go to the earlier split.
    std::size_t sizes[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = static_cast<double>(n) * fr[i];
        sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-12));
        remainders[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    std::size_t leftover = n - assigned;
    int order[3] = {0, 1, 2};
    std::stable_sort(order, order + 3, [&](int a, int b) { return remainders[a] > remainders[b]; });
    for (int i = 0; leftover > 0; i = (i + 1) % 3, --leftover) ++sizes[order[i]];

    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
    Rng rng(derive_seed(seed, "split_dataset"));
    rng.shuffle(indices);

    std::array<DatasetManifest, 3> result;
    const Split split_tags[3] = {Split::train, Split::val, Split::test};
    std::size_t cursor = 0;
    for (int i = 0; i < 3; ++i) {
        result[i].name = manifest.name;
        result[i].domain = manifest.domain;
        result[i].split = split_tags[i];
        result[i].class_set = manifest.class_set;
        for (std::size_t k = 0; k < sizes[i]; ++k) result[i].samples.push_back(manifest.samples[indices[cursor++]]);
        // Keep manifest order within each split for stable downstream iteration.
        std::sort(result[i].samples.begin(), result[i].samples.end(),
                  [](const SampleRecord& a, const SampleRecord& b) { return a.sample_id < b.sample_id; });
    }
    return result;
}

}  // namespace irbseg
