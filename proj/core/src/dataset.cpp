#include "ztafl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ztafl/errors.hpp"
#include "ztafl/rng.hpp"

namespace ztafl {

Dataset generate_synthetic(std::size_t n, int d, int C, std::uint64_t seed) {
    if (C < 2) throw InvalidInputError("generate_synthetic: need at least 2 classes");
    if (d < C) throw InvalidInputError("generate_synthetic: need d >= C for distinct active blocks");
    if (n < 10 * static_cast<std::size_t>(C))
        throw InvalidInputError("generate_synthetic: need n >= 10*C");

    Rng rng(seed);
    Dataset ds;
    ds.X = Matrix(n, static_cast<std::size_t>(d));
    ds.y.resize(n);
    for (int c = 0; c < C; ++c) ds.class_names.push_back("class_" + std::to_string(c));

    // Round-robin labels give balance within one sample; a final shuffle of
    // row order keeps batches mixed.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    const int block = d / C;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % static_cast<std::size_t>(C));
        const std::size_t row = order[i];
        ds.y[row] = c;
        double* x = ds.X.row(row).data();
        for (int j = 0; j < d; ++j) x[j] = rng.normal();
        for (int j = c * block; j < (c + 1) * block; ++j) x[j] += 2.0;
    }
    return ds;
}

NormalizationMap minmax_fit(const Dataset& train) {
    if (train.size() == 0) throw InvalidInputError("minmax_fit: empty training set");
    const std::size_t d = train.dim();
    NormalizationMap map;
    map.min.assign(d, 0.0);
    map.max.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double mn = train.X(0, j), mx = train.X(0, j);
        for (std::size_t i = 1; i < train.size(); ++i) {
            mn = std::min(mn, train.X(i, j));
            mx = std::max(mx, train.X(i, j));
        }
        map.min[j] = mn;
        map.max[j] = mx;
    }
    return map;
}

void minmax_apply(const NormalizationMap& map, Dataset& ds) {
    const std::size_t d = ds.dim();
    if (map.min.size() != d) throw ShapeError("minmax_apply: dimension mismatch");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double* x = ds.X.row(i).data();
        for (std::size_t j = 0; j < d; ++j) {
            const double range = map.max[j] - map.min[j];
            x[j] = range == 0.0 ? 0.0 : (x[j] - map.min[j]) / range;
        }
    }
}

Dataset take(const Dataset& ds, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.class_names = ds.class_names;
    out.X = Matrix(indices.size(), ds.dim());
    out.y.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        std::copy(ds.X.row(src).begin(), ds.X.row(src).end(), out.X.row(i).begin());
        out.y[i] = ds.y[src];
    }
    return out;
}

SplitResult split_dataset(const Dataset& ds, std::uint64_t seed,
                          double train_frac, double val_frac) {
    const int C = ds.num_classes();
    std::vector<std::vector<std::size_t>> by_class(C);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.y[i]].push_back(i);
    for (int c = 0; c < C; ++c)
        if (by_class[c].size() < 3)
            throw InvalidInputError("split: class " + std::to_string(c) + " has fewer than 3 samples");

    const double test_frac = 1.0 - train_frac - val_frac;
    Rng rng(seed);
    std::vector<std::size_t> tr, va, te;

    // Remaining global quota per bucket; used to break largest-remainder ties
    // so that clean global ratios come out exact.
    double deficit[3] = {train_frac * static_cast<double>(ds.size()),
                         val_frac * static_cast<double>(ds.size()),
                         test_frac * static_cast<double>(ds.size())};

    for (int c = 0; c < C; ++c) {
        auto& idx = by_class[c];
        rng.shuffle(idx);
        const double nc = static_cast<double>(idx.size());
        const double ideal[3] = {train_frac * nc, val_frac * nc, test_frac * nc};
        std::size_t count[3];
        double frac[3];
        std::size_t assigned = 0;
        for (int b = 0; b < 3; ++b) {
            count[b] = static_cast<std::size_t>(std::floor(ideal[b]));
            frac[b] = ideal[b] - std::floor(ideal[b]);
            assigned += count[b];
        }
        std::size_t leftover = idx.size() - assigned;
        while (leftover > 0) {
            int best = -1;
            for (int b = 0; b < 3; ++b) {
                if (best == -1 || frac[b] > frac[best] + 1e-12 ||
                    (std::abs(frac[b] - frac[best]) <= 1e-12 &&
                     deficit[b] - static_cast<double>(count[b]) >
                         deficit[best] - static_cast<double>(count[best]) + 1e-12))
                    best = b;
            }
            count[best] += 1;
            frac[best] = -1.0;
            --leftover;
        }
        for (int b = 0; b < 3; ++b) deficit[b] -= static_cast<double>(count[b]);

        std::size_t pos = 0;
        for (std::size_t i = 0; i < count[0]; ++i) tr.push_back(idx[pos++]);
        for (std::size_t i = 0; i < count[1]; ++i) va.push_back(idx[pos++]);
        for (std::size_t i = 0; i < count[2]; ++i) te.push_back(idx[pos++]);
    }
    std::sort(tr.begin(), tr.end());
    std::sort(va.begin(), va.end());
    std::sort(te.begin(), te.end());
    return {take(ds, tr), take(ds, va), take(ds, te)};
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
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

double parse_number(const std::string& s, std::size_t row, const std::string& col) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw InvalidInputError("load_csv: non-numeric value '" + s + "' in column '" + col +
                                "' at data row " + std::to_string(row));
    return value;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("load_csv: cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw InvalidInputError("load_csv: missing header row");
    const std::vector<std::string> header = split_line(line);
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_column) label_idx = i;
    if (label_idx == header.size())
        throw InvalidInputError("load_csv: unknown label column '" + label_column + "'");

    const std::size_t d = header.size() - 1;
    std::vector<double> values;
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        const auto fields = split_line(line);
        if (fields.size() != header.size())
            throw InvalidInputError("load_csv: ragged row " + std::to_string(row) + " (" +
                                    std::to_string(fields.size()) + " fields, expected " +
                                    std::to_string(header.size()) + ")");
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i == label_idx) continue;
            values.push_back(parse_number(fields[i], row, header[i]));
        }
        const std::string& cls = fields[label_idx];
        auto it = std::find(class_names.begin(), class_names.end(), cls);
        if (it == class_names.end()) {
            class_names.push_back(cls);
            labels.push_back(static_cast<int>(class_names.size()) - 1);
        } else {
            labels.push_back(static_cast<int>(it - class_names.begin()));
        }
    }
    if (labels.empty()) throw InvalidInputError("load_csv: no data rows");

    Dataset ds;
    ds.X = Matrix(labels.size(), d);
    ds.X.data() = std::move(values);
    ds.y = std::move(labels);
    ds.class_names = std::move(class_names);
    return ds;
}

void write_csv(const std::string& path, const Dataset& ds, const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("write_csv: cannot open file: " + path);
    for (std::size_t j = 0; j < ds.dim(); ++j) out << "f" << j << ",";
    out << label_column << "\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.9g", ds.X(i, j));
            out << buf << ",";
        }
        out << ds.class_names[ds.y[i]] << "\n";
    }
}

}  // namespace ztafl
