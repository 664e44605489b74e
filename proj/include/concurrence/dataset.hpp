#pragma once

#include <cstddef>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

namespace concurrence {

using Json = nlohmann::ordered_json;

/// One paired observation: x is Kx x T and y is Ky x T, both row-major.
struct SignalPair {
    std::size_t id = 0;  ///< stable identity within the originating dataset
    std::size_t kx = 1;
    std::size_t ky = 1;
    std::size_t length = 0;
    std::vector<double> x;
    std::vector<double> y;

    std::span<const double> x_channel(std::size_t c) const { return {x.data() + c * length, length}; }
    std::span<const double> y_channel(std::size_t c) const { return {y.data() + c * length, length}; }
};

struct Dataset {
    std::vector<SignalPair> pairs;
    Json manifest = Json::object();  ///< generator name, config, seed

    bool empty() const noexcept { return pairs.empty(); }
    std::size_t size() const noexcept { return pairs.size(); }
    std::size_t kx() const;
    std::size_t ky() const;
    std::size_t length() const;

    /// Checks that every pair is internally consistent and all share Kx, Ky, T.
    void validate() const;
};

/// Copies the selected pairs (by position), keeping their ids.
Dataset subset(const Dataset& dataset, std::span<const std::size_t> positions);

std::vector<std::size_t> pair_ids(const Dataset& dataset);

/// Throws a data-integrity error if the two datasets share a pair id.
void require_disjoint(const Dataset& a, const Dataset& b);

}  // namespace concurrence
