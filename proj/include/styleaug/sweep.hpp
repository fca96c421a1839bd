#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "styleaug/metrics.hpp"

namespace styleaug {

struct SweepCell {
    double p1 = 0.0;
    double p2 = 0.0;
    uint64_t seed = 0;
    bool ok = false;
    std::string error;
    Metrics test_metrics;
    Metrics dev_metrics;
    std::string cell_dir;

    nlohmann::json to_json() const;
    static SweepCell from_json(const nlohmann::json& j);
};

struct SweepGrid {
    std::vector<double> p1_values;
    std::vector<double> p2_values;
    std::map<std::pair<double, double>, SweepCell> cells;
    std::optional<SweepCell> control;  // the p1 = p2 = 0 run
    uint64_t base_seed = 0;
    std::string seed_policy;

    size_t failed_cells() const;
    const SweepCell& cell(double p1, double p2) const;
};

// Everything a sweep cell needs apart from (p1, p2): the dataset, the trained
// style engine, and the shared TrainConfig. Cells differ only in their
// augmentation budget and derived seed.
struct SweepPipeline {
    const LabeledDataset* ds = nullptr;
    const StyleTransferEngine* engine = nullptr;
    std::optional<MajorityMinorityPartition> partition_override;
    double alpha = 1.0;
    TrainConfig train;
    std::string backbone_id = "toy";
    std::filesystem::path out_dir;  // cell markers live under out_dir/cells
};

// cell seed = base_seed ^ hash(p1, p2); recorded per cell for replay.
uint64_t sweep_cell_seed(uint64_t base_seed, double p1, double p2);

// Trains and evaluates one cell from scratch (used by the sweep and by
// control-reproduction checks). Throws on failure.
SweepCell run_sweep_cell(const SweepPipeline& pipeline, double p1, double p2, uint64_t seed);

// Full grid; completed cells are skipped via on-disk metrics.json markers;
// failures are recorded and the sweep continues.
SweepGrid sweep(const SweepPipeline& pipeline, const std::vector<double>& p1_grid,
                const std::vector<double>& p2_grid, uint64_t base_seed,
                bool include_control = true);

// p1,p2,accuracy,precision,recall,f1,seed,cell_dir (control row first when
// present), fractional values.
void write_sweep_csv(const SweepGrid& grid, const std::filesystem::path& path);
// Matrix of "acc/prec/rec" percentages, p1 rows by p2 columns.
void write_sweep_table(const SweepGrid& grid, const std::filesystem::path& path);

std::string format_sweep_table(const SweepGrid& grid);

}  // namespace styleaug
