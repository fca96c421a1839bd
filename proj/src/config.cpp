#include "styleaug/config.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

namespace styleaug {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Schema: the default tree doubles as the list of known keys. "toy.classes"
// holds free-form class names whose entries follow the class schema.
json default_tree() {
    return json{
        {"seed", 7},
        {"out", "runs/out"},
        {"data",
         {{"root", ""}, {"labels", ""}, {"label_column", "status"}, {"layout", "csv"}}},
        {"toy",
         {{"image_size", 64},
          {"classes",
           {{"circle", {{"count", 400}, {"shape", "circle"}, {"palette", "warm"}}},
            {"square", {{"count", 400}, {"shape", "square"}, {"palette", "cool"}}},
            {"triangle", {{"count", 80}, {"shape", "triangle"}, {"palette", "earth"}}},
            {"cross", {{"count", 40}, {"shape", "cross"}, {"palette", "pastel"}}}}}}},
        {"style",
         {{"iters", 20000},
          {"style_weight", 10.0},
          {"lr", 1e-4},
          {"batch", 8},
          {"pretrain_iters", 300},
          {"channels", {8, 16, 32, 64}}}},
        {"budget",
         {{"p1", 0.9},
          {"p2", 0.4},
          {"alpha", 1.0},
          {"majority", json::array()},
          {"minority", json::array()}}},
        {"train",
         {{"batch_size", 64},
          {"lr", 1e-4},
          {"epochs", 20},
          {"dropout", 0.23},
          {"focal_alpha", 2.0},
          {"focal_gamma", 2.0},
          {"weight_decay", 1e-4},
          {"workers", 8},
          {"head_width", 512},
          {"backbone", "toy"},
          {"backbone_weights", ""},
          {"image_size", 64},
          {"decoder", ""},
          {"aug_manifest", ""},
          {"model", ""}}},
        {"sweep", {{"p1", "0.1:1.0:0.1"}, {"p2", "0.1:1.0:0.1"}, {"include_control", true}}},
        {"report", {{"topk", 10}, {"attention", true}, {"split", "test"}, {"items", 8}}},
    };
}

std::string keys_of(const json& obj) {
    std::string out;
    for (const auto& [k, _] : obj.items()) out += (out.empty() ? "" : ", ") + k;
    return out;
}

const json class_schema = {{"count", 1}, {"shape", "circle"}, {"palette", "warm"}};

void validate_against(const json& tree, const json& schema, const std::string& prefix) {
    if (!tree.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
    for (const auto& [key, value] : tree.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!schema.contains(key))
            throw ConfigError("unknown config key '" + path + "'; valid keys here: " +
                              keys_of(schema));
        if (path == "toy.classes") {
            for (const auto& [cls, spec] : value.items())
                validate_against(spec, class_schema, path + "." + cls);
        } else if (schema.at(key).is_object()) {
            validate_against(value, schema.at(key), path);
        }
    }
}

// Deep merge: user values override defaults, defaults fill gaps. toy.classes
// is replaced wholesale when the user supplies one.
json merge_tree(const json& defaults, const json& user, const std::string& prefix = "") {
    json out = defaults;
    for (const auto& [key, value] : user.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (path != "toy.classes" && out.contains(key) && out.at(key).is_object() &&
            value.is_object()) {
            out[key] = merge_tree(out.at(key), value, path);
        } else {
            out[key] = value;
        }
    }
    return out;
}

}  // namespace

RunConfig::RunConfig() : tree_(default_tree()) {}

RunConfig RunConfig::defaults() { return RunConfig(); }

RunConfig RunConfig::from_json(const json& j) {
    validate_against(j, default_tree(), "");
    RunConfig cfg;
    cfg.tree_ = merge_tree(default_tree(), j);
    return cfg;
}

RunConfig RunConfig::from_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
    return from_json(j);
}

void RunConfig::set(const std::string& dotted_key, const std::string& value) {
    std::vector<std::string> parts;
    std::stringstream ss(dotted_key);
    std::string part;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("empty config key");

    // validate the path against the schema (class names are free-form)
    const json schema_root = default_tree();
    const json* schema = &schema_root;
    for (size_t i = 0; i < parts.size(); ++i) {
        const bool class_level = i == 2 && parts[0] == "toy" && parts[1] == "classes";
        if (class_level) {
            schema = &class_schema;
            continue;
        }
        if (!schema->contains(parts[i]))
            throw ConfigError("unknown config key '" + dotted_key + "'; valid keys here: " +
                              keys_of(*schema));
        schema = &schema->at(parts[i]);
    }

    json* node = &tree_;
    for (size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];

    // parse the value with the schema's type as a guide
    json parsed;
    if (schema->is_string()) {
        parsed = value;
    } else if (schema->is_boolean()) {
        parsed = (value == "true" || value == "1");
    } else if (schema->is_number_integer()) {
        parsed = std::stoll(value);
    } else if (schema->is_number_float()) {
        parsed = std::stod(value);
    } else {
        json v = json::parse(value, nullptr, false);
        if (v.is_discarded()) throw ConfigError("cannot parse value for '" + dotted_key + "'");
        parsed = v;
    }
    (*node)[parts.back()] = parsed;
}

uint64_t RunConfig::seed() const { return tree_.at("seed").get<uint64_t>(); }
fs::path RunConfig::out_dir() const { return tree_.at("out").get<std::string>(); }

std::string RunConfig::data_root() const { return tree_.at("data").at("root").get<std::string>(); }
std::string RunConfig::data_labels() const {
    return tree_.at("data").at("labels").get<std::string>();
}
std::string RunConfig::data_label_column() const {
    return tree_.at("data").at("label_column").get<std::string>();
}
std::string RunConfig::data_layout() const {
    return tree_.at("data").at("layout").get<std::string>();
}

int RunConfig::toy_image_size() const { return tree_.at("toy").at("image_size").get<int>(); }

std::map<std::string, ToyClassSpec> RunConfig::toy_classes() const {
    std::map<std::string, ToyClassSpec> out;
    for (const auto& [name, spec] : tree_.at("toy").at("classes").items()) {
        ToyClassSpec cs;
        cs.count = spec.at("count").get<size_t>();
        cs.shape = spec.at("shape").get<std::string>();
        cs.palette = spec.at("palette").get<std::string>();
        out[name] = cs;
    }
    return out;
}

long RunConfig::style_iters() const { return tree_.at("style").at("iters").get<long>(); }
double RunConfig::style_weight() const {
    return tree_.at("style").at("style_weight").get<double>();
}
double RunConfig::style_lr() const { return tree_.at("style").at("lr").get<double>(); }
int RunConfig::style_batch() const { return tree_.at("style").at("batch").get<int>(); }
long RunConfig::style_pretrain_iters() const {
    return tree_.at("style").at("pretrain_iters").get<long>();
}
std::vector<int> RunConfig::style_channels() const {
    return tree_.at("style").at("channels").get<std::vector<int>>();
}

double RunConfig::budget_p1() const { return tree_.at("budget").at("p1").get<double>(); }
double RunConfig::budget_p2() const { return tree_.at("budget").at("p2").get<double>(); }
double RunConfig::budget_alpha() const { return tree_.at("budget").at("alpha").get<double>(); }

std::optional<MajorityMinorityPartition> RunConfig::partition_override() const {
    const auto maj = tree_.at("budget").at("majority").get<std::vector<std::string>>();
    const auto mino = tree_.at("budget").at("minority").get<std::vector<std::string>>();
    if (maj.empty() && mino.empty()) return std::nullopt;
    MajorityMinorityPartition p;
    p.majority.insert(maj.begin(), maj.end());
    p.minority.insert(mino.begin(), mino.end());
    return p;
}

TrainConfig RunConfig::train_config() const {
    const auto& t = tree_.at("train");
    TrainConfig cfg;
    cfg.batch_size = t.at("batch_size").get<int>();
    cfg.learning_rate = t.at("lr").get<double>();
    cfg.epochs = t.at("epochs").get<int>();
    cfg.dropout_p = t.at("dropout").get<double>();
    cfg.focal_alpha = t.at("focal_alpha").get<double>();
    cfg.focal_gamma = t.at("focal_gamma").get<double>();
    cfg.weight_decay = t.at("weight_decay").get<double>();
    cfg.workers = t.at("workers").get<int>();
    cfg.head_width = t.at("head_width").get<int>();
    cfg.image_size = t.at("image_size").get<int>();
    cfg.seed = seed();
    return cfg;
}

std::string RunConfig::backbone_id() const {
    return tree_.at("train").at("backbone").get<std::string>();
}

std::vector<double> RunConfig::sweep_p1() const {
    return parse_grid(tree_.at("sweep").at("p1").get<std::string>());
}
std::vector<double> RunConfig::sweep_p2() const {
    return parse_grid(tree_.at("sweep").at("p2").get<std::string>());
}
bool RunConfig::sweep_include_control() const {
    return tree_.at("sweep").at("include_control").get<bool>();
}

int RunConfig::report_topk() const { return tree_.at("report").at("topk").get<int>(); }
bool RunConfig::report_attention() const {
    return tree_.at("report").at("attention").get<bool>();
}
Split RunConfig::report_split() const {
    return split_from_string(tree_.at("report").at("split").get<std::string>());
}
int RunConfig::report_items() const { return tree_.at("report").at("items").get<int>(); }

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> values;
    auto round6 = [](double v) { return std::round(v * 1e6) / 1e6; };
    if (text.find(':') != std::string::npos) {
        double start, end, step;
        char c1, c2;
        std::istringstream ss(text);
        if (!(ss >> start >> c1 >> end >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0)
            throw ConfigError("bad grid spec '" + text + "' (want start:end:step)");
        for (double v = start; v <= end + 1e-9; v += step) values.push_back(round6(v));
    } else {
        std::stringstream ss(text);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) values.push_back(round6(std::stod(tok)));
        }
    }
    if (values.empty()) throw ConfigError("empty grid spec '" + text + "'");
    return values;
}

json make_provenance(const std::string& stage, const RunConfig& cfg,
                     const std::vector<fs::path>& inputs) {
    json rec;
    rec["stage"] = stage;
    rec["version"] = kVersion;
    rec["seed"] = cfg.seed();
    rec["config"] = cfg.tree();
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    rec["timestamp_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(now).count();
    json sums = json::object();
    for (const auto& p : inputs) {
        if (!fs::exists(p)) continue;
        std::ifstream in(p, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        sums[p.string()] = hex64(fnv1a64(buf.str()));
    }
    rec["input_checksums"] = sums;
    return rec;
}

void write_provenance(const fs::path& stage_dir, const json& record) {
    fs::create_directories(stage_dir);
    std::ofstream out(stage_dir / "run.json");
    if (!out) throw IngestionError("cannot write provenance: " + (stage_dir / "run.json").string());
    out << record.dump(2) << "\n";
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericError*>(&e)) return 4;
    if (dynamic_cast<const StageDependencyError*>(&e)) return 3;
    if (dynamic_cast<const ValidationError*>(&e)) return 2;
    return 1;
}

const std::vector<std::string>& known_subcommands() {
    static const std::vector<std::string> cmds = {"ingest",    "train-style", "augment",
                                                  "train-clf", "eval",        "sweep",
                                                  "report",    "toy-e2e"};
    return cmds;
}

}  // namespace styleaug
