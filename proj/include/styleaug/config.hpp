#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "styleaug/classifier.hpp"
#include "styleaug/dataset.hpp"

namespace styleaug {

inline constexpr const char* kVersion = "1.0.0";

// Effective run configuration: a JSON tree validated against the known-key
// schema, plus dotted-path overrides from CLI flags. The persisted snapshot
// always reflects the post-override values.
class RunConfig {
public:
    RunConfig();
    static RunConfig defaults();
    static RunConfig from_file(const std::filesystem::path& path);
    static RunConfig from_json(const nlohmann::json& j);

    // "train.lr=3e-4" style override; unknown keys throw ConfigError listing
    // the valid keys at that level.
    void set(const std::string& dotted_key, const std::string& value);

    const nlohmann::json& tree() const { return tree_; }

    uint64_t seed() const;
    std::filesystem::path out_dir() const;

    // typed accessors (with schema defaults)
    std::string data_root() const;
    std::string data_labels() const;
    std::string data_label_column() const;
    std::string data_layout() const;

    int toy_image_size() const;
    std::map<std::string, ToyClassSpec> toy_classes() const;

    long style_iters() const;
    double style_weight() const;
    double style_lr() const;
    int style_batch() const;
    long style_pretrain_iters() const;
    std::vector<int> style_channels() const;

    double budget_p1() const;
    double budget_p2() const;
    double budget_alpha() const;
    std::optional<MajorityMinorityPartition> partition_override() const;

    TrainConfig train_config() const;
    std::string backbone_id() const;

    std::vector<double> sweep_p1() const;
    std::vector<double> sweep_p2() const;
    bool sweep_include_control() const;

    int report_topk() const;
    bool report_attention() const;
    Split report_split() const;
    int report_items() const;

private:
    nlohmann::json tree_;
};

// "0.1:1.0:0.1" (start:end:step) or "0.1,0.4,0.9" -> ascending values.
std::vector<double> parse_grid(const std::string& text);

// Provenance record accompanying every stage artifact.
nlohmann::json make_provenance(const std::string& stage, const RunConfig& cfg,
                               const std::vector<std::filesystem::path>& inputs);
void write_provenance(const std::filesystem::path& stage_dir, const nlohmann::json& record);

// Executes one pipeline stage; returns a process exit status (0 ok, 2
// validation, 3 stage dependency, 4 numerical). Exceptions are mapped by the
// caller via exit_code_for.
void run_stage(const std::string& subcommand, const RunConfig& cfg);
int exit_code_for(const std::exception& e);

const std::vector<std::string>& known_subcommands();

}  // namespace styleaug
