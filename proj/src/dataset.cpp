#include "rwl/dataset.hpp"

#include "rwl/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <string_view>

namespace rwl {

namespace fs = std::filesystem;

namespace {

struct LineReader {
    fs::path file;
    std::ifstream in;
    std::size_t line_no = 0;

    explicit LineReader(fs::path p) : file(std::move(p)), in(file) {
        if (!in) {
            throw DatasetError("cannot open " + file.string());
        }
    }

    // Next data line split on whitespace; false at end of file. Blank and
    // '#' lines are skipped.
    bool next(std::vector<std::string_view>& fields, std::string& buffer) {
        while (std::getline(in, buffer)) {
            ++line_no;
            if (!buffer.empty() && buffer.back() == '\r') {
                buffer.pop_back();
            }
            const auto first = buffer.find_first_not_of(" \t");
            if (first == std::string::npos || buffer[first] == '#') {
                continue;
            }
            fields.clear();
            std::string_view rest(buffer);
            while (!rest.empty()) {
                const auto b = rest.find_first_not_of(" \t");
                if (b == std::string_view::npos) {
                    break;
                }
                rest.remove_prefix(b);
                const auto e = rest.find_first_of(" \t");
                fields.push_back(rest.substr(0, e));
                rest.remove_prefix(e == std::string_view::npos ? rest.size() : e);
            }
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw DatasetError(file.string() + ":" + std::to_string(line_no) + ": " + what);
    }

    void expect_fields(const std::vector<std::string_view>& fields, std::size_t count) const {
        if (fields.size() != count) {
            fail("expected " + std::to_string(count) + " tab-separated fields, found " +
                 std::to_string(fields.size()));
        }
    }

    long long parse_int(std::string_view s) const {
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) {
            fail("malformed integer '" + std::string(s) + "'");
        }
        return v;
    }

    double parse_double(std::string_view s) const {
        double v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
            fail("malformed value '" + std::string(s) + "'");
        }
        return v;
    }
};

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::ofstream open_out(const fs::path& file) {
    std::ofstream out(file);
    if (!out) {
        throw DatasetError("cannot write " + file.string());
    }
    return out;
}

const char* tag_name(SplitTag t) {
    switch (t) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
    case SplitTag::none: break;
    }
    return "none";
}

} // namespace

std::vector<Edge> canonical_edges(std::vector<Edge> edges, std::size_t n) {
    for (Edge& e : edges) {
        if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= n ||
            static_cast<std::size_t>(e.v) >= n) {
            throw DatasetError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                               ") has an endpoint outside [0, " + std::to_string(n) + ")");
        }
        if (e.u == e.v) {
            throw DatasetError("self-loop at node " + std::to_string(e.u));
        }
        if (e.u > e.v) {
            std::swap(e.u, e.v);
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<Edge> read_edge_list(const fs::path& file, std::size_t n) {
    LineReader reader(file);
    std::vector<std::string_view> fields;
    std::string buffer;
    std::vector<Edge> edges;
    while (reader.next(fields, buffer)) {
        reader.expect_fields(fields, 2);
        const long long a = reader.parse_int(fields[0]);
        const long long b = reader.parse_int(fields[1]);
        if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n) {
            reader.fail("edge endpoint out of range [0, " + std::to_string(n) + ")");
        }
        if (a == b) {
            reader.fail("self-loop at node " + std::to_string(a));
        }
        edges.push_back({static_cast<int>(a), static_cast<int>(b)});
    }
    return canonical_edges(std::move(edges), n);
}

void write_edge_list(const std::vector<Edge>& edges, const fs::path& file) {
    auto out = open_out(file);
    for (const Edge& e : edges) {
        out << e.u << '\t' << e.v << '\n';
    }
}

Dataset load_dataset(const fs::path& dir) {
    for (const char* name : {"features.tsv", "edges.tsv", "labels.tsv"}) {
        if (!fs::exists(dir / name)) {
            throw DatasetError("missing " + (dir / name).string());
        }
    }
    std::vector<std::string_view> fields;
    std::string buffer;

    // Labels fix n.
    std::map<long long, long long> label_lines;
    {
        LineReader reader(dir / "labels.tsv");
        while (reader.next(fields, buffer)) {
            reader.expect_fields(fields, 2);
            const long long node = reader.parse_int(fields[0]);
            const long long label = reader.parse_int(fields[1]);
            if (node < 0) {
                reader.fail("negative node id");
            }
            if (label < 0) {
                reader.fail("label " + std::to_string(label) + " out of range");
            }
            const auto [it, inserted] = label_lines.emplace(node, label);
            if (!inserted && it->second != label) {
                reader.fail("conflicting label for node " + std::to_string(node));
            }
        }
    }
    if (label_lines.empty()) {
        throw DatasetError((dir / "labels.tsv").string() + ": no labels");
    }
    const auto n = static_cast<std::size_t>(label_lines.rbegin()->first + 1);
    if (label_lines.size() != n) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!label_lines.count(static_cast<long long>(i))) {
                throw DatasetError((dir / "labels.tsv").string() + ": node " + std::to_string(i) +
                                   " has no label");
            }
        }
    }

    Dataset ds;
    ds.labels.reserve(n);
    for (const auto& [node, label] : label_lines) {
        ds.labels.push_back(static_cast<int>(label));
    }
    ds.num_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;

    struct Entry {
        long long node, feature;
        double value;
    };
    std::vector<Entry> entries;
    long long max_feature = -1;
    {
        LineReader reader(dir / "features.tsv");
        while (reader.next(fields, buffer)) {
            reader.expect_fields(fields, 3);
            Entry e{reader.parse_int(fields[0]), reader.parse_int(fields[1]),
                    reader.parse_double(fields[2])};
            if (e.node < 0 || static_cast<std::size_t>(e.node) >= n) {
                reader.fail("feature node id " + std::to_string(e.node) + " out of range [0, " +
                            std::to_string(n) + ")");
            }
            if (e.feature < 0) {
                reader.fail("negative feature id");
            }
            max_feature = std::max(max_feature, e.feature);
            entries.push_back(e);
        }
    }
    ds.features = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(max_feature + 1));
    for (const Entry& e : entries) {
        ds.features(static_cast<Eigen::Index>(e.node), static_cast<Eigen::Index>(e.feature)) = e.value;
    }

    ds.edges = read_edge_list(dir / "edges.tsv", n);

    if (fs::exists(dir / "split.tsv")) {
        ds.split_tags.assign(n, SplitTag::none);
        LineReader reader(dir / "split.tsv");
        while (reader.next(fields, buffer)) {
            reader.expect_fields(fields, 2);
            const long long node = reader.parse_int(fields[0]);
            if (node < 0 || static_cast<std::size_t>(node) >= n) {
                reader.fail("split node id out of range");
            }
            SplitTag tag = SplitTag::none;
            if (fields[1] == "train") {
                tag = SplitTag::train;
            } else if (fields[1] == "val") {
                tag = SplitTag::val;
            } else if (fields[1] == "test") {
                tag = SplitTag::test;
            } else {
                reader.fail("unknown split '" + std::string(fields[1]) + "'");
            }
            ds.split_tags[static_cast<std::size_t>(node)] = tag;
        }
    }

    ds.original_ids.resize(n);
    std::iota(ds.original_ids.begin(), ds.original_ids.end(), 0);
    return ds;
}

void write_dataset(const Dataset& ds, const fs::path& dir) {
    validate(ds);
    fs::create_directories(dir);
    const auto n = static_cast<Eigen::Index>(ds.nodes());
    const Eigen::Index d = ds.features.cols();
    {
        auto out = open_out(dir / "features.tsv");
        bool last_column_written = d == 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index f = 0; f < d; ++f) {
                const double v = ds.features(i, f);
                if (v != 0.0) {
                    out << i << '\t' << f << '\t' << format_double(v) << '\n';
                    last_column_written = last_column_written || f == d - 1;
                }
            }
        }
        // An explicit zero pins d when the last feature column is empty.
        if (!last_column_written && n > 0) {
            out << 0 << '\t' << d - 1 << '\t' << 0 << '\n';
        }
    }
    write_edge_list(ds.edges, dir / "edges.tsv");
    {
        auto out = open_out(dir / "labels.tsv");
        for (Eigen::Index i = 0; i < n; ++i) {
            out << i << '\t' << ds.labels[static_cast<std::size_t>(i)] << '\n';
        }
    }
    if (!ds.split_tags.empty()) {
        auto out = open_out(dir / "split.tsv");
        for (std::size_t i = 0; i < ds.split_tags.size(); ++i) {
            if (ds.split_tags[i] != SplitTag::none) {
                out << i << '\t' << tag_name(ds.split_tags[i]) << '\n';
            }
        }
    }
}

void validate(const Dataset& ds) {
    const std::size_t n = ds.nodes();
    if (static_cast<std::size_t>(ds.features.rows()) != n) {
        throw DatasetError("feature matrix has " + std::to_string(ds.features.rows()) +
                           " rows for " + std::to_string(n) + " nodes");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (ds.labels[i] < 0 || ds.labels[i] >= ds.num_classes) {
            throw DatasetError("label of node " + std::to_string(i) + " outside [0, " +
                               std::to_string(ds.num_classes) + ")");
        }
    }
    for (std::size_t e = 0; e < ds.edges.size(); ++e) {
        const Edge& edge = ds.edges[e];
        if (edge.u < 0 || edge.u >= edge.v || static_cast<std::size_t>(edge.v) >= n) {
            throw DatasetError("edge " + std::to_string(e) + " is not canonical or out of range");
        }
        if (e > 0 && !(ds.edges[e - 1] < edge)) {
            throw DatasetError("edge list is not sorted and deduplicated");
        }
    }
    if (!ds.split_tags.empty() && ds.split_tags.size() != n) {
        throw DatasetError("split tags do not cover every node");
    }
}

Dataset largest_connected_component(const Dataset& ds) {
    const std::size_t n = ds.nodes();
    if (n == 0) {
        throw DatasetError("largest_connected_component: empty graph");
    }
    std::vector<std::vector<int>> adj(n);
    for (const Edge& e : ds.edges) {
        adj[static_cast<std::size_t>(e.u)].push_back(e.v);
        adj[static_cast<std::size_t>(e.v)].push_back(e.u);
    }

    std::vector<int> component(n, -1);
    std::vector<int> best;
    std::deque<int> queue;
    for (std::size_t start = 0; start < n; ++start) {
        if (component[start] >= 0) {
            continue;
        }
        std::vector<int> members;
        component[start] = static_cast<int>(start);
        queue.push_back(static_cast<int>(start));
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            members.push_back(u);
            for (int v : adj[static_cast<std::size_t>(u)]) {
                if (component[static_cast<std::size_t>(v)] < 0) {
                    component[static_cast<std::size_t>(v)] = static_cast<int>(start);
                    queue.push_back(v);
                }
            }
        }
        // Strict '>' keeps the earliest (smallest-index) component on ties.
        if (members.size() > best.size()) {
            best = std::move(members);
        }
    }
    std::sort(best.begin(), best.end());

    std::vector<int> new_index(n, -1);
    for (std::size_t k = 0; k < best.size(); ++k) {
        new_index[static_cast<std::size_t>(best[k])] = static_cast<int>(k);
    }

    Dataset out;
    out.num_classes = ds.num_classes;
    out.features.resize(static_cast<Eigen::Index>(best.size()), ds.features.cols());
    out.labels.reserve(best.size());
    out.original_ids.reserve(best.size());
    for (std::size_t k = 0; k < best.size(); ++k) {
        const auto old = static_cast<std::size_t>(best[k]);
        out.features.row(static_cast<Eigen::Index>(k)) = ds.features.row(static_cast<Eigen::Index>(old));
        out.labels.push_back(ds.labels[old]);
        out.original_ids.push_back(ds.original_ids.empty() ? static_cast<int>(old)
                                                           : ds.original_ids[old]);
        if (!ds.split_tags.empty()) {
            out.split_tags.push_back(ds.split_tags[old]);
        }
    }
    for (const Edge& e : ds.edges) {
        const int a = new_index[static_cast<std::size_t>(e.u)];
        const int b = new_index[static_cast<std::size_t>(e.v)];
        if (a >= 0 && b >= 0) {
            out.edges.push_back({std::min(a, b), std::max(a, b)});
        }
    }
    std::sort(out.edges.begin(), out.edges.end());
    return out;
}

Split make_splits(std::size_t n, SplitRatios ratios, std::uint64_t seed) {
    if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0)) {
        throw std::invalid_argument("split ratios must be positive");
    }
    if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        throw std::invalid_argument("split ratios must sum to 1");
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_stream(seed, "split");
    std::shuffle(order.begin(), order.end(), rng);

    // The epsilon absorbs products such as 0.29 * 100 = 28.999999999999996.
    const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(n) + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(ratios.val * static_cast<double>(n) + 1e-9));

    Split split;
    split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                     order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::optional<Split> stored_split(const Dataset& ds) {
    if (ds.split_tags.empty()) {
        return std::nullopt;
    }
    Split split;
    for (std::size_t i = 0; i < ds.split_tags.size(); ++i) {
        switch (ds.split_tags[i]) {
        case SplitTag::train: split.train.push_back(static_cast<int>(i)); break;
        case SplitTag::val: split.val.push_back(static_cast<int>(i)); break;
        case SplitTag::test: split.test.push_back(static_cast<int>(i)); break;
        case SplitTag::none: break;
        }
    }
    return split;
}

void row_normalize(Matrix& features) {
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const double s = features.row(i).sum();
        if (s != 0.0) {
            features.row(i) /= s;
        }
    }
}

} // namespace rwl
