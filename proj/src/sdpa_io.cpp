#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "reachcert/sdp.hpp"

namespace reachcert {

namespace {

// matno 0 is F0; matno k>0 is the k-th constraint matrix.
using EntryKey = std::tuple<int, int, int, int>;  // matno, block(1-based), i, j

// The file encodes: min c'x s.t. sum_k x_k F_k - F0 >= 0. Our standard form
// maps onto its dual (max <F0,Y> s.t. <F_k,Y> = c_k): F_k = A_k, c = b,
// F0 = -C. Free variables become a trailing diagonal block via t = t+ - t-.
std::map<EntryKey, double> collect_entries(const SdpStandardForm& p, int& split_block_dim) {
    std::map<EntryKey, double> ent;
    const int nb = static_cast<int>(p.block_dims.size());
    split_block_dim = p.n_free > 0 ? 2 * p.n_free : 0;

    auto put = [&](int matno, int blk, int i, int j, double v) {
        if (v == 0.0) return;
        if (i > j) std::swap(i, j);
        ent[{matno, blk, i, j}] += v;
    };

    for (const auto& e : p.objective) put(0, e.block + 1, e.row + 1, e.col + 1, -e.value);
    for (std::size_t j = 0; j < p.free_objective.size(); ++j) {
        put(0, nb + 1, 2 * static_cast<int>(j) + 1, 2 * static_cast<int>(j) + 1,
            -p.free_objective[j]);
        put(0, nb + 1, 2 * static_cast<int>(j) + 2, 2 * static_cast<int>(j) + 2,
            p.free_objective[j]);
    }
    for (int k = 0; k < static_cast<int>(p.constraints.size()); ++k) {
        for (const auto& e : p.constraints[k].entries)
            put(k + 1, e.block + 1, e.row + 1, e.col + 1, e.value);
        for (const auto& [j, v] : p.constraints[k].free_terms) {
            put(k + 1, nb + 1, 2 * j + 1, 2 * j + 1, v);
            put(k + 1, nb + 1, 2 * j + 2, 2 * j + 2, -v);
        }
    }
    for (auto it = ent.begin(); it != ent.end();) {
        if (it->second == 0.0)
            it = ent.erase(it);
        else
            ++it;
    }
    return ent;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::size_t sdpa_entry_count(const SdpStandardForm& p) {
    int split = 0;
    return collect_entries(p, split).size();
}

std::string to_sdpa(const SdpStandardForm& p) {
    int split_dim = 0;
    auto entries = collect_entries(p, split_dim);

    std::ostringstream os;
    os << p.constraints.size() << "\n";
    os << p.block_dims.size() + (split_dim > 0 ? 1 : 0) << "\n";
    for (std::size_t i = 0; i < p.block_dims.size(); ++i) {
        if (i) os << " ";
        os << p.block_dims[i];
    }
    if (split_dim > 0) {
        if (!p.block_dims.empty()) os << " ";
        os << -split_dim;
    }
    os << "\n";
    for (std::size_t k = 0; k < p.constraints.size(); ++k) {
        if (k) os << " ";
        os << fmt(p.constraints[k].rhs);
    }
    os << "\n";
    for (const auto& [key, v] : entries) {
        const auto& [matno, blk, i, j] = key;
        os << matno << " " << blk << " " << i << " " << j << " " << fmt(v) << "\n";
    }
    return os.str();
}

void write_sdpa(const SdpStandardForm& p, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << to_sdpa(p);
    if (!f) throw std::runtime_error("write failed: " + path);
}

SdpStandardForm parse_sdpa(const std::string& text) {
    // Comment lines start with " or *; braces, commas and parens are noise.
    std::string clean;
    clean.reserve(text.size());
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        std::size_t first = line.find_first_not_of(" \t\r");
        if (first != std::string::npos && (line[first] == '"' || line[first] == '*')) continue;
        for (char c : line)
            clean += (c == '{' || c == '}' || c == '(' || c == ')' || c == ',') ? ' ' : c;
        clean += '\n';
    }
    std::istringstream in(clean);

    long m = 0, nblocks = 0;
    if (!(in >> m) || !(in >> nblocks) || m < 0 || nblocks <= 0)
        throw std::runtime_error("sdpa parse: bad header");
    SdpStandardForm p;
    p.block_dims.resize(nblocks);
    for (auto& d : p.block_dims)
        if (!(in >> d) || d == 0) throw std::runtime_error("sdpa parse: bad block dims");
    p.constraints.resize(m);
    for (auto& c : p.constraints)
        if (!(in >> c.rhs)) throw std::runtime_error("sdpa parse: bad objective vector");

    int matno, blk, i, j;
    double v;
    while (in >> matno >> blk >> i >> j >> v) {
        if (matno < 0 || matno > m || blk < 1 || blk > nblocks || i < 1 || j < 1)
            throw std::runtime_error("sdpa parse: bad entry indices");
        if (i > j) std::swap(i, j);
        SdpTerm t{blk - 1, i - 1, j - 1, v};
        if (matno == 0) {
            t.value = -v;  // F0 = -C
            p.objective.push_back(t);
        } else {
            p.constraints[matno - 1].entries.push_back(t);
        }
    }
    if (!in.eof()) throw std::runtime_error("sdpa parse: trailing garbage");
    return p;
}

SdpStandardForm read_sdpa(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_sdpa(ss.str());
}

}  // namespace reachcert
