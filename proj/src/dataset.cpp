#include "styleaug/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace styleaug {

namespace fs = std::filesystem;

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "dev") return Split::Dev;
    if (s == "test") return Split::Test;
    throw FormatError("unknown split tag '" + s + "' (expected train|dev|test)");
}

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Dev: return "dev";
        default: return "test";
    }
}

Image LabeledItem::load() const {
    if (in_memory()) return pixels;
    return load_image(path);
}

size_t ClassHistogram::total() const {
    size_t n = 0;
    for (const auto& [_, c] : counts) n += c;
    return n;
}

std::vector<std::string> ClassHistogram::classes() const {
    std::vector<std::string> out;
    out.reserve(counts.size());
    for (const auto& [k, _] : counts) out.push_back(k);
    return out;
}

LabeledDataset::LabeledDataset(std::vector<LabeledItem> items, std::vector<std::string> classes,
                               std::vector<std::string> warnings)
    : items_(std::move(items)), classes_(std::move(classes)), warnings_(std::move(warnings)) {
    std::sort(classes_.begin(), classes_.end());
    classes_.erase(std::unique(classes_.begin(), classes_.end()), classes_.end());
}

std::vector<size_t> LabeledDataset::split_indices(Split s) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < items_.size(); ++i)
        if (items_[i].split == s) out.push_back(i);
    return out;
}

std::vector<size_t> LabeledDataset::class_train_indices(const std::string& label) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < items_.size(); ++i)
        if (items_[i].split == Split::Train && items_[i].label == label) out.push_back(i);
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

fs::path resolve_image_path(const fs::path& root, const std::string& name) {
    fs::path direct = root / name;
    if (fs::exists(direct)) return direct;
    fs::path nested = root / "images_256" / name;
    if (fs::exists(nested)) return nested;
    throw IngestionError("missing image file: " + direct.string());
}

}  // namespace

LabeledDataset load_dataset(const fs::path& root, const fs::path& labels_csv,
                            const std::string& label_column) {
    std::ifstream in(labels_csv);
    if (!in) throw IngestionError("cannot open labels file: " + labels_csv.string());

    std::string header;
    if (!std::getline(in, header)) throw FormatError("empty dataset: no header in " + labels_csv.string());
    const auto cols = split_csv_line(header);

    auto col_index = [&](const std::string& name) -> int {
        for (size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return static_cast<int>(i);
        return -1;
    };
    const int img_col = col_index("image");
    const int set_col = col_index("set");
    const int lab_col = col_index(label_column);
    if (img_col < 0) throw FormatError("labels file lacks an 'image' column");
    if (set_col < 0) throw FormatError("labels file lacks a 'set' column");
    if (lab_col < 0) throw FormatError("labels file lacks label column '" + label_column + "'");

    std::vector<LabeledItem> items;
    std::string line;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != cols.size())
            throw FormatError("row " + std::to_string(lineno) + " has " +
                              std::to_string(fields.size()) + " fields, header has " +
                              std::to_string(cols.size()));
        LabeledItem item;
        item.id = fields[img_col];
        item.path = resolve_image_path(root, fields[img_col]);
        item.label = fields[lab_col];
        item.split = split_from_string(fields[set_col]);
        auto [h, w] = probe_image(item.path);
        item.height = h;
        item.width = w;
        items.push_back(std::move(item));
    }
    if (items.empty()) throw FormatError("empty dataset: " + labels_csv.string() + " has no rows");

    std::vector<std::string> classes;
    for (const auto& it : items) classes.push_back(it.label);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

    std::vector<std::string> warnings;
    for (const auto& c : classes) {
        const bool in_train = std::any_of(items.begin(), items.end(), [&](const LabeledItem& it) {
            return it.split == Split::Train && it.label == c;
        });
        if (!in_train) warnings.push_back("class '" + c + "' has no train items");
    }
    return LabeledDataset(std::move(items), std::move(classes), std::move(warnings));
}

LabeledDataset load_image_folder(const fs::path& root) {
    if (!fs::is_directory(root)) throw IngestionError("not a directory: " + root.string());

    const bool split_layout = fs::is_directory(root / "train");
    std::vector<std::pair<Split, fs::path>> roots;
    if (split_layout) {
        roots.emplace_back(Split::Train, root / "train");
        if (fs::is_directory(root / "dev")) roots.emplace_back(Split::Dev, root / "dev");
        if (fs::is_directory(root / "test")) roots.emplace_back(Split::Test, root / "test");
    } else {
        roots.emplace_back(Split::Train, root);
    }

    std::vector<LabeledItem> items;
    std::vector<std::string> classes;
    for (const auto& [split, dir] : roots) {
        std::vector<fs::path> class_dirs;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_directory()) class_dirs.push_back(e.path());
        std::sort(class_dirs.begin(), class_dirs.end());
        for (const auto& cdir : class_dirs) {
            const std::string label = cdir.filename().string();
            classes.push_back(label);
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(cdir))
                if (e.is_regular_file()) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                LabeledItem item;
                item.id = label + "/" + f.filename().string();
                item.path = f;
                item.label = label;
                item.split = split;
                auto [h, w] = probe_image(f);
                item.height = h;
                item.width = w;
                items.push_back(std::move(item));
            }
        }
    }
    if (items.empty()) throw FormatError("empty dataset: no images under " + root.string());
    return LabeledDataset(std::move(items), std::move(classes));
}

ClassHistogram class_histogram(const LabeledDataset& ds) {
    if (ds.size() == 0) throw ValidationError("class_histogram: dataset is empty");
    ClassHistogram hist;
    for (const auto& c : ds.classes()) hist.counts[c] = 0;
    for (const auto& it : ds.items())
        if (it.split == Split::Train) ++hist.counts[it.label];
    return hist;
}

MajorityMinorityPartition partition_majority_minority(
    const ClassHistogram& hist, const std::optional<MajorityMinorityPartition>& override_lists) {
    const auto classes = hist.classes();
    if (classes.size() < 2)
        throw ValidationError("partition requires at least 2 classes, got " +
                              std::to_string(classes.size()));

    if (override_lists) {
        const auto& o = *override_lists;
        for (const auto& c : o.majority)
            if (o.minority.count(c))
                throw ValidationError("override lists overlap on class '" + c + "'");
        std::set<std::string> covered;
        covered.insert(o.majority.begin(), o.majority.end());
        covered.insert(o.minority.begin(), o.minority.end());
        for (const auto& c : classes)
            if (!covered.count(c))
                throw ValidationError("override does not cover class '" + c + "'");
        for (const auto& c : covered)
            if (!hist.counts.count(c))
                throw ValidationError("override names unknown class '" + c + "'");
        return o;
    }

    std::vector<double> counts;
    for (const auto& c : classes) counts.push_back(static_cast<double>(hist.counts.at(c)));
    std::vector<double> sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    const double median =
        (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    MajorityMinorityPartition part;
    for (size_t i = 0; i < classes.size(); ++i) {
        if (counts[i] >= median)
            part.majority.insert(classes[i]);
        else
            part.minority.insert(classes[i]);
    }
    if (part.minority.empty())
        throw ValidationError("minority empty; supply override (all counts >= median)");
    if (part.majority.empty())
        throw ValidationError("majority empty; supply override");
    return part;
}

// ---------------------------------------------------------------------------
// Toy dataset generation. Everything below is pure arithmetic on a per-item
// RNG stream derived from (seed, class, split, index), so pixel content never
// depends on generation order.
// ---------------------------------------------------------------------------

namespace {

struct Rgb {
    double r, g, b;
};

const std::map<std::string, std::vector<Rgb>>& palettes() {
    static const std::map<std::string, std::vector<Rgb>> p = {
        {"warm",
         {{0.86, 0.28, 0.16}, {0.95, 0.61, 0.21}, {0.98, 0.82, 0.45}, {0.72, 0.17, 0.29},
          {0.93, 0.45, 0.33}}},
        {"cool",
         {{0.14, 0.32, 0.72}, {0.22, 0.62, 0.84}, {0.43, 0.84, 0.83}, {0.18, 0.24, 0.47},
          {0.55, 0.66, 0.91}}},
        {"earth",
         {{0.36, 0.27, 0.17}, {0.58, 0.46, 0.28}, {0.74, 0.65, 0.45}, {0.30, 0.38, 0.22},
          {0.52, 0.56, 0.36}}},
        {"pastel",
         {{0.92, 0.77, 0.83}, {0.77, 0.88, 0.92}, {0.85, 0.92, 0.78}, {0.95, 0.91, 0.77},
          {0.86, 0.81, 0.94}}},
        {"mono",
         {{0.15, 0.15, 0.15}, {0.38, 0.38, 0.38}, {0.60, 0.60, 0.60}, {0.80, 0.80, 0.80},
          {0.94, 0.94, 0.94}}},
    };
    return p;
}

const std::vector<Rgb>& palette_colors(const std::string& name) {
    const auto& all = palettes();
    auto it = all.find(name);
    if (it == all.end()) throw ValidationError("unknown palette '" + name + "'");
    return it->second;
}

enum class ShapeKind { Circle, Square, Triangle, Cross, Ring, Diamond };

ShapeKind shape_from_string(const std::string& s) {
    if (s == "circle") return ShapeKind::Circle;
    if (s == "square") return ShapeKind::Square;
    if (s == "triangle") return ShapeKind::Triangle;
    if (s == "cross") return ShapeKind::Cross;
    if (s == "ring") return ShapeKind::Ring;
    if (s == "diamond") return ShapeKind::Diamond;
    throw ValidationError("unknown shape '" + s + "'");
}

// Signed distance (negative inside) of a point in shape-local coordinates
// where the shape has unit radius.
double shape_distance(ShapeKind kind, double x, double y) {
    switch (kind) {
        case ShapeKind::Circle:
            return std::hypot(x, y) - 1.0;
        case ShapeKind::Square:
            return std::max(std::abs(x), std::abs(y)) - 1.0;
        case ShapeKind::Diamond:
            return (std::abs(x) + std::abs(y)) - 1.0;
        case ShapeKind::Ring: {
            const double d = std::hypot(x, y);
            return std::max(d - 1.0, 0.55 - d);
        }
        case ShapeKind::Cross: {
            const double bar = 0.34;
            const double dh = std::max(std::abs(x) - 1.0, std::abs(y) - bar);
            const double dv = std::max(std::abs(y) - 1.0, std::abs(x) - bar);
            return std::min(dh, dv);
        }
        case ShapeKind::Triangle: {
            // Equilateral triangle pointing up, inscribed in the unit circle.
            const double k = std::sqrt(3.0);
            double px = std::abs(x);
            double py = y + 0.5;
            double d1 = (k * px + py - 1.0) / 2.0;  // slanted edges
            double d2 = -py;                        // bottom edge at y=-0.5
            return std::max(d1, d2);
        }
    }
    return 1.0;
}

// Smooth value noise: bilinear interpolation of a coarse random grid.
struct ValueNoise {
    int grid;
    std::vector<double> values;

    ValueNoise(int grid_, std::mt19937_64& rng) : grid(grid_), values(grid_ * grid_) {
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        for (auto& v : values) v = dist(rng);
    }

    double sample(double u, double v) const {
        const double gx = u * (grid - 1), gy = v * (grid - 1);
        const int x0 = std::min(static_cast<int>(gx), grid - 2);
        const int y0 = std::min(static_cast<int>(gy), grid - 2);
        const double fx = gx - x0, fy = gy - y0;
        auto at = [&](int yy, int xx) { return values[yy * grid + xx]; };
        const double a = at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx;
        const double b = at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx;
        return a * (1 - fy) + b * fy;
    }
};

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
    return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

std::vector<std::string> palette_names() {
    std::vector<std::string> names;
    for (const auto& [k, _] : palettes()) names.push_back(k);
    return names;
}

// The class recipe biases the palette choice but never determines it:
// texture and color stay nuisance variables, shape is the only reliable cue.
Image render_toy_item(ShapeKind shape, const std::string& class_palette, int size,
                      std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    static const std::vector<std::string> all_names = palette_names();
    std::string pal_name = class_palette;
    if (unit(rng) > 0.4) {
        pal_name = all_names[static_cast<size_t>(unit(rng) * all_names.size()) %
                             all_names.size()];
    }
    const auto& pal = palette_colors(pal_name);
    std::uniform_int_distribution<int> pal_idx(0, static_cast<int>(pal.size()) - 1);

    // Background texture: two palette colors mixed by stripes, checker or
    // smooth noise. This is the style nuisance the classifier must ignore.
    const int bg_mode = static_cast<int>(unit(rng) * 3.0);
    Rgb bg_a = pal[pal_idx(rng)];
    Rgb bg_b = pal[pal_idx(rng)];
    const double stripe_freq = 3.0 + unit(rng) * 8.0;
    const double stripe_angle = unit(rng) * 3.14159265358979;
    ValueNoise noise(5, rng);
    const double speckle = unit(rng) * 0.10;

    // Foreground shape placement; the shape is the content cue.
    Rgb fg = pal[pal_idx(rng)];
    auto lum_gap = [](const Rgb& a, const Rgb& b) {
        return std::abs((a.r + a.g + a.b) - (b.r + b.g + b.b));
    };
    for (int tries = 0; tries < 4 && (lum_gap(fg, bg_a) < 0.30 || lum_gap(fg, bg_b) < 0.30);
         ++tries)
        fg = pal[pal_idx(rng)];
    const double cx = 0.30 + unit(rng) * 0.40;
    const double cy = 0.30 + unit(rng) * 0.40;
    const double radius = 0.22 + unit(rng) * 0.16;
    const double angle = unit(rng) * 2.0 * 3.14159265358979;
    const double ca = std::cos(angle), sa = std::sin(angle);

    Image img;
    img.height = size;
    img.width = size;
    img.rgb.resize(static_cast<size_t>(size) * size * 3);

    const double edge = 1.5 / (radius * size);  // ~1.5px soft edge in shape units
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = (x + 0.5) / size, v = (y + 0.5) / size;
            double t;
            if (bg_mode == 0) {
                t = 0.5 + 0.5 * std::sin(2.0 * 3.14159265358979 * stripe_freq *
                                         (u * std::cos(stripe_angle) + v * std::sin(stripe_angle)));
            } else if (bg_mode == 1) {
                const int cu = static_cast<int>(u * stripe_freq);
                const int cv = static_cast<int>(v * stripe_freq);
                t = ((cu + cv) % 2 == 0) ? 0.15 : 0.85;
            } else {
                t = noise.sample(u, v);
            }
            Rgb col = lerp(bg_a, bg_b, t);

            // shape-local coordinates (rotate, scale to unit radius)
            const double dx = (u - cx) / radius, dy = (v - cy) / radius;
            const double lx = ca * dx + sa * dy, ly = -sa * dx + ca * dy;
            const double d = shape_distance(shape, lx, ly);
            if (d < edge) {
                const double cover = std::clamp((edge - d) / (2.0 * edge), 0.0, 1.0);
                col = lerp(col, fg, cover);
            }

            const double jitter = speckle * (unit(rng) - 0.5);
            const size_t p = (static_cast<size_t>(y) * size + x) * 3;
            img.rgb[p] =
                static_cast<uint8_t>(std::lround(std::clamp(col.r + jitter, 0.0, 1.0) * 255.0));
            img.rgb[p + 1] =
                static_cast<uint8_t>(std::lround(std::clamp(col.g + jitter, 0.0, 1.0) * 255.0));
            img.rgb[p + 2] =
                static_cast<uint8_t>(std::lround(std::clamp(col.b + jitter, 0.0, 1.0) * 255.0));
        }
    }
    return img;
}

}  // namespace

LabeledDataset make_toy_dataset(const std::map<std::string, ToyClassSpec>& spec, int image_size,
                                uint64_t seed) {
    if (spec.size() < 2) throw ValidationError("toy dataset needs at least 2 classes");
    if (image_size < 32)
        throw ValidationError("toy image_size must be >= 32 (encoder needs two downsampling stages)");
    for (const auto& [name, cs] : spec)
        if (cs.count < 1)
            throw ValidationError("toy class '" + name + "' needs count >= 1");

    std::vector<LabeledItem> items;
    std::vector<std::string> classes;
    for (const auto& [name, cs] : spec) {  // std::map: alphabetical, deterministic
        classes.push_back(name);
        const ShapeKind shape = shape_from_string(cs.shape);
        palette_colors(cs.palette);  // validates the name

        struct SplitPlan {
            Split split;
            size_t count;
        };
        const size_t dev_count = std::max<size_t>(4, (cs.count + 9) / 10);
        const size_t test_count = std::max<size_t>(8, (cs.count + 4) / 5);
        const SplitPlan plans[] = {{Split::Train, cs.count},
                                   {Split::Dev, dev_count},
                                   {Split::Test, test_count}};
        for (const auto& plan : plans) {
            for (size_t i = 0; i < plan.count; ++i) {
                uint64_t item_seed = mix_seed(seed, name + "/" + to_string(plan.split) + "/" +
                                                        std::to_string(i));
                std::mt19937_64 rng(item_seed);
                LabeledItem item;
                item.id = name + "_" + to_string(plan.split) + "_" + std::to_string(i) + ".png";
                item.pixels = render_toy_item(shape, cs.palette, image_size, rng);
                item.label = name;
                item.split = plan.split;
                item.height = image_size;
                item.width = image_size;
                items.push_back(std::move(item));
            }
        }
    }
    return LabeledDataset(std::move(items), std::move(classes));
}

std::filesystem::path materialize_dataset(const LabeledDataset& ds, const fs::path& root) {
    fs::create_directories(root);
    const fs::path labels = root / "labels.csv";
    std::ofstream out(labels);
    if (!out) throw IngestionError("cannot write labels file: " + labels.string());
    out << "image,label,set\n";
    for (const auto& it : ds.items()) {
        const fs::path img_path = root / "images" / it.id;
        save_png(it.load(), img_path);
        out << "images/" << it.id << "," << it.label << "," << to_string(it.split) << "\n";
    }
    return labels;
}

}  // namespace styleaug
