#include "liftlab/error.hpp"
#include "liftlab/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

namespace liftlab::eval {

namespace {

constexpr std::string_view kTailColumns[] = {"train_acc", "train_f1", "eval_acc", "eval_f1", "tp",
                                             "fp",        "tn",       "fn",       "seed",    "status"};

std::string real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Free text must not break the CSV layout.
std::string sanitize(std::string s) {
    for (auto& c : s) {
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    }
    return s;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

template <typename T>
T number(const std::string& cell, std::size_t line_no) {
    T v{};
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || p != cell.data() + cell.size()) {
        throw ParseError("catalog line " + std::to_string(line_no) + ": bad number '" + cell + "'");
    }
    return v;
}

} // namespace

std::string catalog_csv(std::span<const CatalogRow> rows) {
    std::vector<std::string> names;
    for (const auto& row : rows) {
        for (const auto& [k, v] : row.params) {
            if (std::find(names.begin(), names.end(), k) == names.end()) names.push_back(k);
        }
    }
    std::string out = "id,experiment";
    for (const auto& n : names) out += "," + n;
    for (auto c : kTailColumns) out += "," + std::string(c);
    out += '\n';
    for (const auto& row : rows) {
        out += std::to_string(row.id) + "," + sanitize(row.experiment);
        for (const auto& n : names) {
            const auto* v = row.param(n);
            out += "," + (v ? sanitize(*v) : std::string());
        }
        const auto& cm = row.eval.cm;
        out += "," + real(row.train.accuracy) + "," + real(row.train.f1) + "," + real(row.eval.metrics.accuracy) + "," +
               real(row.eval.metrics.f1) + "," + std::to_string(cm.tp) + "," + std::to_string(cm.fp) + "," +
               std::to_string(cm.tn) + "," + std::to_string(cm.fn) + "," + std::to_string(row.seed) + "," +
               sanitize(row.status) + "\n";
    }
    return out;
}

std::vector<CatalogRow> parse_catalog_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty catalog");
    const auto header = split_line(line);
    constexpr std::size_t n_tail = std::size(kTailColumns);
    if (header.size() < 2 + n_tail || header[0] != "id" || header[1] != "experiment") {
        throw SchemaError("catalog header must start with id,experiment");
    }
    const std::size_t n_params = header.size() - 2 - n_tail;
    for (std::size_t i = 0; i < n_tail; ++i) {
        if (header[2 + n_params + i] != kTailColumns[i]) {
            throw SchemaError("catalog column '" + std::string(kTailColumns[i]) + "' missing or out of place");
        }
    }

    std::vector<CatalogRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw SchemaError("catalog line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                              " fields, expected " + std::to_string(header.size()));
        }
        CatalogRow row;
        row.id = number<std::size_t>(cells[0], line_no);
        row.experiment = cells[1];
        for (std::size_t p = 0; p < n_params; ++p) {
            if (!cells[2 + p].empty()) row.params.emplace_back(header[2 + p], cells[2 + p]);
        }
        const auto* t = &cells[2 + n_params];
        row.train.accuracy = number<double>(t[0], line_no);
        row.train.f1 = number<double>(t[1], line_no);
        row.eval.cm = {number<std::uint64_t>(t[4], line_no), number<std::uint64_t>(t[5], line_no),
                       number<std::uint64_t>(t[6], line_no), number<std::uint64_t>(t[7], line_no)};
        row.eval.metrics = metrics(row.eval.cm);
        row.eval.metrics.accuracy = number<double>(t[2], line_no);
        row.eval.metrics.f1 = number<double>(t[3], line_no);
        row.seed = number<std::uint64_t>(t[8], line_no);
        row.status = t[9];
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string summary_csv(std::span<const SummaryRow> rows) {
    std::string out =
        "group,rows,median_eval_f1,max_eval_f1,median_eval_acc,max_eval_acc,median_train_f1,median_train_acc\n";
    for (const auto& s : rows) {
        out += sanitize(s.group) + "," + std::to_string(s.rows) + "," + real(s.median_eval_f1) + "," +
               real(s.max_eval_f1) + "," + real(s.median_eval_acc) + "," + real(s.max_eval_acc) + "," +
               real(s.median_train_f1) + "," + real(s.median_train_acc) + "\n";
    }
    return out;
}

} // namespace liftlab::eval
