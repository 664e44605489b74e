#include "concurrence/dataset.hpp"

#include <algorithm>
#include <string>

#include "concurrence/error.hpp"

namespace concurrence {

std::size_t Dataset::kx() const { return pairs.empty() ? 0 : pairs.front().kx; }
std::size_t Dataset::ky() const { return pairs.empty() ? 0 : pairs.front().ky; }
std::size_t Dataset::length() const { return pairs.empty() ? 0 : pairs.front().length; }

void Dataset::validate() const {
    for (const auto& p : pairs) {
        if (p.kx == 0 || p.ky == 0 || p.length == 0) throw config_error("signal pair with an empty dimension");
        if (p.x.size() != p.kx * p.length || p.y.size() != p.ky * p.length) {
            throw integrity_error("signal pair " + std::to_string(p.id) + " has inconsistent buffer sizes");
        }
        if (p.kx != kx() || p.ky != ky() || p.length != length()) {
            throw config_error("all signal pairs must share Kx, Ky and T");
        }
    }
}

Dataset subset(const Dataset& dataset, std::span<const std::size_t> positions) {
    Dataset out;
    out.manifest = dataset.manifest;
    out.pairs.reserve(positions.size());
    for (auto pos : positions) {
        if (pos >= dataset.size()) throw config_error("subset position out of range");
        out.pairs.push_back(dataset.pairs[pos]);
    }
    return out;
}

std::vector<std::size_t> pair_ids(const Dataset& dataset) {
    std::vector<std::size_t> ids;
    ids.reserve(dataset.size());
    for (const auto& p : dataset.pairs) ids.push_back(p.id);
    return ids;
}

void require_disjoint(const Dataset& a, const Dataset& b) {
    auto ia = pair_ids(a);
    auto ib = pair_ids(b);
    std::sort(ia.begin(), ia.end());
    std::sort(ib.begin(), ib.end());
    std::vector<std::size_t> common;
    std::set_intersection(ia.begin(), ia.end(), ib.begin(), ib.end(), std::back_inserter(common));
    if (!common.empty()) {
        throw integrity_error("training and evaluation pair sets overlap (e.g. pair " +
                              std::to_string(common.front()) + ")");
    }
}

}  // namespace concurrence
