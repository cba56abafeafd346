#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <unistd.h>

#include "fcmforge/fcm_io.hpp"
#include "fcmforge/text.hpp"

namespace fcmforge::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("fcmforge-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

FcmGraph random_fcm(std::mt19937_64& rng, std::size_t n, double density, const std::string& name,
                    std::size_t label_offset) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_real_distribution<double> weight(-1.0, 1.0);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("L" + std::to_string(i + label_offset));
    std::vector<LabeledEdge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (coin(rng) < density) edges.push_back({labels[i], labels[j], weight(rng)});
        }
    }
    return build_fcm(name, labels, edges);
}

FcmGraph random_grid_fcm(std::mt19937_64& rng, std::size_t n) {
    static const double grid[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
    std::uniform_int_distribution<int> pick(0, 4);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("x" + std::to_string(i));
    std::vector<LabeledEdge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double w = grid[pick(rng)];
            if (w != 0.0) edges.push_back({labels[i], labels[j], w});
        }
    }
    return build_fcm("grid", labels, edges);
}

std::vector<double> random_convex(std::mt19937_64& rng, std::size_t m) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> w(m);
    double total = 0.0;
    for (auto& x : w) total += (x = e(rng));
    for (auto& x : w) x /= total;
    // push the rounding residue into the largest weight so the sum is 1 to the last bit or two
    double s = 0.0;
    for (double x : w) s += x;
    *std::max_element(w.begin(), w.end()) += 1.0 - s;
    return w;
}

std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), dir).string(), read_file(e.path().string()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

RunConfig fixture_config(const std::string& file, const fs::path& out) {
    const auto dir = repo_data() / "fixture";
    auto config = config_from_json(parse_json(read_file((dir / file).string()), file), dir);
    config.output_dir = out;
    return config;
}

namespace {

std::vector<std::string> csv_fields(const std::string& line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else {
            out.back() += c;
        }
    }
    return out;
}

}  // namespace

double final_value(const std::string& csv, const std::string& label) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        auto end = csv.find('\n', pos);
        if (end == std::string::npos) end = csv.size();
        if (end > pos) lines.push_back(csv.substr(pos, end - pos));
        pos = end + 1;
    }
    if (lines.size() < 2) throw std::runtime_error("trajectory has no rows");
    const auto header = csv_fields(lines.front());
    const auto it = std::find(header.begin(), header.end(), label);
    if (it == header.end()) throw std::runtime_error("no column '" + label + "'");
    return std::stod(csv_fields(lines.back()).at(static_cast<std::size_t>(it - header.begin())));
}

}  // namespace fcmforge::testing
