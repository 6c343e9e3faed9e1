#include "irbseg/trainer.hpp"

#include <fstream>

#include <json.hpp>

#include "irbseg/errors.hpp"
#include "irbseg/unet.hpp"

namespace irbseg {

using nlohmann::json;

std::string to_string(DeviceHint d) { return d == DeviceHint::cpu_only ? "cpu_only" : "auto"; }

DeviceHint device_hint_from_string(const std::string& s) {
    if (s == "cpu_only") return DeviceHint::cpu_only;
    if (s == "auto") return DeviceHint::auto_select;
    throw ValidationError("unknown device hint: " + s);
}

void validate_trainer_config(const TrainerConfig& config) {
    if (config.epochs < 0) throw ArgumentError("trainer.epochs must be non-negative");
    if (config.batch_size <= 0) throw ArgumentError("trainer.batch_size must be positive");
    if (config.learning_rate <= 0.0) throw ArgumentError("trainer.learning_rate must be positive");
    if (config.image_height <= 0 || config.image_width <= 0) throw ArgumentError("trainer.image_size must be positive");
    if (config.image_height % 8 != 0 || config.image_width % 8 != 0)
        throw ArgumentError("trainer.image_size must be divisible by the model's downsampling factor (8)");
    if (config.base_channels < 1) throw ArgumentError("trainer.base_channels must be >= 1");
    if (config.convs_per_stage < 1 || config.convs_per_stage > 3)
        throw ArgumentError("trainer.convs_per_stage must be in [1, 3]");
    if (config.model_name != "unet") throw ArgumentError("unknown model: " + config.model_name);
}

std::unique_ptr<SegmentationModel> create_model(const TrainerConfig& config) {
    if (config.model_name == "unet") return std::make_unique<UnetModel>(config.base_channels, config.convs_per_stage);
    throw ArgumentError("unknown model: " + config.model_name);
}

namespace {

json trainer_config_to_json(const TrainerConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"seed", c.seed},
            {"image_size", {c.image_height, c.image_width}},
            {"model_name", c.model_name},
            {"device_hint", to_string(c.device_hint)},
            {"base_channels", c.base_channels},
            {"convs_per_stage", c.convs_per_stage}};
}

TrainerConfig trainer_config_from_json(const json& j) {
    TrainerConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.image_height = j.at("image_size").at(0).get<int>();
    c.image_width = j.at("image_size").at(1).get<int>();
    c.model_name = j.at("model_name").get<std::string>();
    c.device_hint = device_hint_from_string(j.at("device_hint").get<std::string>());
    c.base_channels = j.at("base_channels").get<int>();
    c.convs_per_stage = j.at("convs_per_stage").get<int>();
    return c;
}

json class_set_to_json(const ClassSet& cs) {
    json arr = json::array();
    for (const auto& e : cs.entries()) arr.push_back({{"id", e.id}, {"name", e.name}, {"is_foreground", e.is_foreground}});
    return arr;
}

ClassSet class_set_from_json(const json& arr) {
    std::vector<ClassInfo> entries;
    for (const auto& c : arr)
        entries.push_back({c.at("id").get<int>(), c.at("name").get<std::string>(), c.at("is_foreground").get<bool>()});
    return ClassSet(std::move(entries));
}

}  // namespace

TrainResult train_model(const TrainerConfig& config, const DatasetManifest& trainset,
                        const std::filesystem::path& checkpoint_dir) {
    validate_trainer_config(config);
    if (trainset.samples.empty()) throw ArgumentError("train_model: trainset is empty");

    auto model = create_model(config);
    model->initialize(trainset.class_set.size(), config.seed);
    std::vector<double> losses = model->fit(trainset, config);

    std::filesystem::create_directories(checkpoint_dir);
    model->save_weights(checkpoint_dir / "weights.bin");
    json sidecar;
    sidecar["model_name"] = model->name();
    sidecar["num_classes"] = model->num_classes();
    sidecar["class_set"] = class_set_to_json(trainset.class_set);
    sidecar["config"] = trainer_config_to_json(config);
    sidecar["training_log"] = losses;
    std::ofstream out(checkpoint_dir / "checkpoint.json");
    if (!out) throw IoError("cannot write sidecar: " + (checkpoint_dir / "checkpoint.json").string());
    out << sidecar.dump(2) << "\n";

    return {checkpoint_dir, std::move(losses)};
}

std::unique_ptr<SegmentationModel> load_checkpoint(const std::filesystem::path& checkpoint_dir, ClassSet* class_set_out) {
    std::ifstream in(checkpoint_dir / "checkpoint.json");
    if (!in) throw LoadError("cannot open checkpoint sidecar: " + (checkpoint_dir / "checkpoint.json").string());
    json sidecar;
    try {
        in >> sidecar;
    } catch (const json::exception& e) {
        throw LoadError("corrupt checkpoint sidecar: " + std::string(e.what()));
    }
    TrainerConfig config = trainer_config_from_json(sidecar.at("config"));
    auto model = create_model(config);
    model->load_weights(checkpoint_dir / "weights.bin");
    if (class_set_out) *class_set_out = class_set_from_json(sidecar.at("class_set"));
    return model;
}

IoUReport evaluate_model(const SegmentationModel& model, const DatasetManifest& eval_set) {
    if (eval_set.samples.empty()) throw ArgumentError("evaluate_model: eval set is empty");
    if (model.num_classes() != eval_set.class_set.size())
        throw ContractError("evaluate_model: checkpoint has " + std::to_string(model.num_classes()) +
                            " classes but the eval set declares " + std::to_string(eval_set.class_set.size()));
    ConfusionMatrix cm(eval_set.class_set);
    for (const auto& rec : eval_set.samples) {
        const Image8 image = read_image_rgb8(rec.image_path);
        const Mask8 gt = read_mask_gray8(rec.mask_path);
        const Mask8 pred = predict_mask(model, image, /*allow_resize=*/true);
        cm.add(gt, pred);
    }
    return build_report(cm);
}

IoUReport evaluate_checkpoint(const std::filesystem::path& checkpoint_dir, const DatasetManifest& eval_set) {
    ClassSet checkpoint_classes;
    auto model = load_checkpoint(checkpoint_dir, &checkpoint_classes);
    if (!(checkpoint_classes == eval_set.class_set))
        throw ContractError("evaluate_checkpoint: checkpoint and eval set disagree on the class set");
    return evaluate_model(*model, eval_set);
}

Mask8 predict_mask(const SegmentationModel& model, const Image8& image, bool allow_resize) {
    const int factor = model.downsampling_factor();
    if (image.height % factor == 0 && image.width % factor == 0) return model.predict(image);
    if (!allow_resize)
        throw ArgumentError("predict_mask: image size " + std::to_string(image.height) + "x" +
                            std::to_string(image.width) + " is not divisible by " + std::to_string(factor) +
                            " and no resize was requested");
    const int h = std::max(factor, (image.height + factor - 1) / factor * factor);
    const int w = std::max(factor, (image.width + factor - 1) / factor * factor);
    const Mask8 pred = model.predict(resize_bilinear(image, h, w));
    return resize_nearest(pred, image.height, image.width);
}

TrainEvalFn make_train_eval(const TrainerConfig& config, const std::filesystem::path& work_dir) {
    return [config, work_dir](const DatasetManifest& trainset, const DatasetManifest& val,
                              int iteration) -> std::pair<IoUReport, std::string> {
        char name[32];
        std::snprintf(name, sizeof(name), "iter_%02d", iteration);
        const std::filesystem::path checkpoint_dir = work_dir / name / "checkpoint";
        train_model(config, trainset, checkpoint_dir);
        IoUReport report = evaluate_checkpoint(checkpoint_dir, val);
        return {std::move(report), checkpoint_dir.string()};
    };
}

}  // namespace irbseg
