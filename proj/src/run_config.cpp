#include "c2f/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace c2f {

namespace {

using ordered_json = nlohmann::ordered_json;

const char* embed_style_name(PatchEmbedStyle s) {
    return s == PatchEmbedStyle::SingleConv ? "single-conv" : "three-conv";
}

PatchEmbedStyle embed_style_from_name(const std::string& s) {
    if (s == "single-conv") return PatchEmbedStyle::SingleConv;
    if (s == "three-conv") return PatchEmbedStyle::ThreeConv;
    throw ConfigError("unknown patch_embed_style '" + s +
                      "' (valid: single-conv, three-conv)");
}

void append_model_fields(ordered_json& j, const ModelConfig& m) {
    j["variant"] = variant_name(m.variant);
    j["isotropic"] = m.isotropic;
    j["channels"] = m.channels;
    j["depths"] = m.depths;
    j["kernel_size"] = m.kernel_size;
    j["ffn_ratio"] = m.ffn_ratio;
    j["fusion"] = fusion_name(m.fusion);
    j["drop_path_rate"] = m.drop_path_rate;
    j["layer_scale_init"] = m.layer_scale_init;
    j["num_classes"] = m.num_classes;
    j["patch_embed_style"] = embed_style_name(m.patch_embed_style);
    j["a_branch_gelu"] = m.a_branch_gelu;
    j["output_projection"] = m.output_projection;
}

void append_train_fields(ordered_json& j, const TrainConfig& t) {
    j["batch_size"] = t.batch_size;
    j["lr_base"] = t.lr_base;
    j["warmup_steps"] = t.warmup_steps;
    j["epochs"] = t.epochs;
    j["label_smoothing"] = t.label_smoothing;
    j["seed"] = t.seed;
    j["train_size"] = t.train_size;
    j["val_size"] = t.val_size;
    j["image_size"] = t.image_size;
}

ordered_json parse_object(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    return j;
}

// Applies explicit model keys onto cfg (which may already hold a preset).
void apply_model_fields(const ordered_json& j, ModelConfig& m) {
    if (j.contains("isotropic")) m.isotropic = j.at("isotropic").get<bool>();
    if (j.contains("channels")) m.channels = j.at("channels").get<std::vector<std::int64_t>>();
    if (j.contains("depths")) m.depths = j.at("depths").get<std::vector<std::int64_t>>();
    if (j.contains("kernel_size")) m.kernel_size = j.at("kernel_size").get<int>();
    if (j.contains("ffn_ratio")) m.ffn_ratio = j.at("ffn_ratio").get<double>();
    if (j.contains("fusion")) m.fusion = fusion_from_name(j.at("fusion").get<std::string>());
    if (j.contains("drop_path_rate")) m.drop_path_rate = j.at("drop_path_rate").get<double>();
    if (j.contains("layer_scale_init"))
        m.layer_scale_init = j.at("layer_scale_init").get<double>();
    if (j.contains("num_classes")) m.num_classes = j.at("num_classes").get<std::int64_t>();
    if (j.contains("patch_embed_style"))
        m.patch_embed_style = embed_style_from_name(j.at("patch_embed_style").get<std::string>());
    if (j.contains("a_branch_gelu")) m.a_branch_gelu = j.at("a_branch_gelu").get<bool>();
    if (j.contains("output_projection"))
        m.output_projection = j.at("output_projection").get<bool>();
}

const std::set<std::string> kModelKeys = {
    "variant",          "isotropic",   "channels",         "depths",
    "kernel_size",      "ffn_ratio",   "fusion",           "drop_path_rate",
    "layer_scale_init", "num_classes", "patch_embed_style", "a_branch_gelu",
    "output_projection"};

const std::set<std::string> kTrainKeys = {"batch_size", "lr_base",    "warmup_steps",
                                          "epochs",     "label_smoothing", "seed",
                                          "train_size", "val_size",   "image_size"};

void reject_unknown_keys(const ordered_json& j, bool allow_train) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (kModelKeys.count(it.key())) continue;
        if (allow_train && kTrainKeys.count(it.key())) continue;
        throw ConfigError("unknown config key '" + it.key() + "'");
    }
}

ModelConfig model_from_json(const ordered_json& j) {
    ModelConfig m;
    if (j.contains("variant")) m = ModelConfig::preset(j.at("variant").get<std::string>());
    apply_model_fields(j, m);
    m.validate();
    return m;
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text) {
    ordered_json j = parse_object(text);
    reject_unknown_keys(j, true);
    RunConfig rc;
    rc.model = model_from_json(j);
    TrainConfig& t = rc.train;
    if (j.contains("batch_size")) t.batch_size = j.at("batch_size").get<std::int64_t>();
    if (j.contains("lr_base")) t.lr_base = j.at("lr_base").get<double>();
    if (j.contains("warmup_steps")) t.warmup_steps = j.at("warmup_steps").get<std::int64_t>();
    if (j.contains("epochs")) t.epochs = j.at("epochs").get<std::int64_t>();
    if (j.contains("label_smoothing")) t.label_smoothing = j.at("label_smoothing").get<double>();
    if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("train_size")) t.train_size = j.at("train_size").get<std::int64_t>();
    if (j.contains("val_size")) t.val_size = j.at("val_size").get<std::int64_t>();
    if (j.contains("image_size")) t.image_size = j.at("image_size").get<std::int64_t>();
    if (t.batch_size < 1 || t.epochs < 1 || t.train_size < 1 || t.val_size < 1)
        throw ConfigError("batch_size, epochs and split sizes must be positive");
    if (t.label_smoothing < 0.0 || t.label_smoothing >= 1.0)
        throw ConfigError("label_smoothing must lie in [0,1)");
    return rc;
}

RunConfig run_config_from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return run_config_from_json_text(ss.str());
}

std::string run_config_to_json_text(const RunConfig& rc) {
    ordered_json j;
    append_model_fields(j, rc.model);
    append_train_fields(j, rc.train);
    return j.dump(2) + "\n";
}

std::string model_config_to_json_text(const ModelConfig& mc) {
    ordered_json j;
    append_model_fields(j, mc);
    return j.dump();
}

ModelConfig model_config_from_json_text(const std::string& text) {
    ordered_json j = parse_object(text);
    reject_unknown_keys(j, false);
    return model_from_json(j);
}

}  // namespace c2f
