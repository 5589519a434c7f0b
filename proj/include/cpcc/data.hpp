#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cpcc/errors.hpp"
#include "cpcc/matrix.hpp"
#include "cpcc/numerics.hpp"
#include "cpcc/rng.hpp"

namespace cpcc {

struct LabeledDataset {
    Matrix features;
    std::optional<HardLabels> labels;
    std::string name;
};

// k isotropic Gaussian clusters with centers rejection-sampled until every
// pair is at least center_dist apart. The sampling box grows with k^(1/d) so
// low-dimensional placements stay feasible.
inline LabeledDataset make_blobs(std::size_t k, std::size_t per_cluster, std::size_t d,
                                 double center_dist, double cluster_std, Rng& rng) {
    if (k < 2) throw ConfigInvalid("make_blobs: k must be >= 2");
    if (per_cluster < 1 || d < 1) throw ConfigInvalid("make_blobs: empty shape");
    if (!(center_dist > 0.0)) throw ConfigInvalid("make_blobs: center_dist must be > 0");
    if (cluster_std < 0.0) throw ConfigInvalid("make_blobs: cluster_std must be >= 0");

    const double box = 0.75 * center_dist *
                       std::max(1.0, std::pow(static_cast<double>(k), 1.0 / static_cast<double>(d)));
    Matrix centers(k, d);
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t j = 0; j < d; ++j) centers(c, j) = (2.0 * rng.next_uniform() - 1.0) * box;
        placed = true;
        for (std::size_t a = 0; a + 1 < k && placed; ++a)
            for (std::size_t b = a + 1; b < k && placed; ++b)
                if (squared_euclidean(centers.row(a), centers.row(b)) < center_dist * center_dist)
                    placed = false;
    }
    if (!placed)
        throw CenterPlacementFailed("make_blobs: could not place " + std::to_string(k) +
                                    " centers at distance " + std::to_string(center_dist));

    LabeledDataset out;
    out.name = "blobs";
    out.features = Matrix(k * per_cluster, d);
    out.labels = HardLabels(k * per_cluster);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < per_cluster; ++i) {
            std::size_t r = c * per_cluster + i;
            (*out.labels)[r] = static_cast<int>(c);
            for (std::size_t j = 0; j < d; ++j)
                out.features(r, j) = centers(c, j) + cluster_std * rng.next_gaussian();
        }
    return out;
}

// Concentric 2-D rings (radii 1, 3, 5) with radial Gaussian noise; a stress
// case where a plain Voronoi split cannot recover the generating partition.
inline LabeledDataset make_rings(std::size_t k, std::size_t per_ring, double noise, Rng& rng) {
    if (k < 2 || k > 3) throw ConfigInvalid("make_rings: k must be 2 or 3");
    if (per_ring < 1) throw ConfigInvalid("make_rings: empty rings");
    if (noise < 0.0) throw ConfigInvalid("make_rings: noise must be >= 0");

    LabeledDataset out;
    out.name = "rings";
    out.features = Matrix(k * per_ring, 2);
    out.labels = HardLabels(k * per_ring);
    for (std::size_t c = 0; c < k; ++c) {
        double radius = 1.0 + 2.0 * static_cast<double>(c);
        for (std::size_t i = 0; i < per_ring; ++i) {
            std::size_t r = c * per_ring + i;
            double angle = 6.283185307179586476925286766559 * rng.next_uniform();
            double rad = radius + (noise > 0.0 ? noise * rng.next_gaussian() : 0.0);
            out.features(r, 0) = rad * std::cos(angle);
            out.features(r, 1) = rad * std::sin(angle);
            (*out.labels)[r] = static_cast<int>(c);
        }
    }
    return out;
}

namespace detail {

inline bool parse_double(const std::string& tok, double& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r')) --last;
    if (first == last) return false;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> toks;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            toks.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    toks.push_back(cur);
    return toks;
}

} // namespace detail

// Comma-separated values, one sample per row, optional single header row
// (auto-detected when the first row fails numeric parsing). With has_labels
// the final column holds integer class labels, remapped to 0..K-1 in
// first-appearance order.
inline LabeledDataset load_csv(const std::string& path, bool has_labels) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);

    std::vector<std::vector<double>> rows;
    std::vector<int> raw_labels;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool first_content = true;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto toks = detail::split_csv_line(line);
        std::vector<double> vals(toks.size());
        bool numeric = true;
        for (std::size_t j = 0; j < toks.size(); ++j)
            if (!detail::parse_double(toks[j], vals[j])) {
                numeric = false;
                break;
            }
        if (!numeric) {
            if (first_content) { // header row
                first_content = false;
                continue;
            }
            throw ParseError(path + ":" + std::to_string(line_no) + ": non-numeric value");
        }
        first_content = false;
        if (width == 0) {
            width = vals.size();
            if (has_labels && width < 2)
                throw ParseError(path + ": need at least one feature column plus labels");
        } else if (vals.size() != width) {
            throw RaggedRows(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(width) + " columns, got " +
                             std::to_string(vals.size()));
        }
        for (double v : vals)
            if (!std::isfinite(v))
                throw NonFiniteValue(path + ":" + std::to_string(line_no) +
                                     ": non-finite value");
        if (has_labels) {
            double lv = vals.back();
            if (lv != std::floor(lv) || std::abs(lv) > 2147483647.0)
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": label column is not an integer");
            raw_labels.push_back(static_cast<int>(lv));
            vals.pop_back();
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw ParseError(path + ": no data rows");

    LabeledDataset out;
    out.name = path;
    out.features = Matrix(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) out.features(i, j) = rows[i][j];
    if (has_labels) {
        // remap to a contiguous 0..K-1 range in first-appearance order
        std::vector<int> seen;
        HardLabels mapped(raw_labels.size());
        for (std::size_t i = 0; i < raw_labels.size(); ++i) {
            int v = raw_labels[i];
            std::size_t pos = 0;
            while (pos < seen.size() && seen[pos] != v) ++pos;
            if (pos == seen.size()) seen.push_back(v);
            mapped[i] = static_cast<int>(pos);
        }
        out.labels = std::move(mapped);
    }
    return out;
}

inline void save_csv(const std::string& path, const LabeledDataset& ds) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    char buf[64];
    for (std::size_t i = 0; i < ds.features.rows; ++i) {
        for (std::size_t j = 0; j < ds.features.cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.features(i, j));
            if (j) out << ',';
            out << buf;
        }
        if (ds.labels) out << ',' << (*ds.labels)[i];
        out << '\n';
    }
}

inline HardLabels load_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    HardLabels labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        double v;
        if (!detail::parse_double(line, v)) {
            if (labels.empty() && line_no == 1) continue; // header
            throw ParseError(path + ":" + std::to_string(line_no) + ": not a label");
        }
        if (v != std::floor(v))
            throw ParseError(path + ":" + std::to_string(line_no) + ": not an integer label");
        labels.push_back(static_cast<int>(v));
    }
    if (labels.empty()) throw ParseError(path + ": no labels");
    return labels;
}

inline void save_labels_csv(const std::string& path, const HardLabels& labels) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    for (int v : labels) out << v << '\n';
}

} // namespace cpcc
