#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tailforge/errors.hpp"
#include "tailforge/rng.hpp"

namespace tailforge::sampling {

enum class Scheme { instance_balanced, class_balanced };

inline Scheme scheme_from_string(const std::string& s) {
    if (s == "instance_balanced") return Scheme::instance_balanced;
    if (s == "class_balanced") return Scheme::class_balanced;
    throw ConfigError("unknown sampler scheme: " + s);
}

inline std::string to_string(Scheme s) {
    return s == Scheme::instance_balanced ? "instance_balanced" : "class_balanced";
}

// Positions 0..n-1 grouped by label; positions index into `labels`, not into
// any underlying dataset.
inline std::vector<std::vector<int>> group_by_class(const std::vector<int>& labels, int num_classes) {
    if (num_classes < 1) throw ConfigError("group_by_class: num_classes must be >= 1");
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int c = labels[i];
        if (c < 0 || c >= num_classes) throw ConfigError("group_by_class: label out of range");
        by_class[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
    }
    return by_class;
}

// Instance-balanced sampling: one epoch is a uniform random permutation of all
// positions, so every instance appears exactly once.
inline std::vector<int> instance_balanced_epoch(int n, Rng& rng) {
    if (n < 1) throw ConfigError("instance_balanced_epoch: n must be >= 1");
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    return order;
}

// Class-balanced sampling with replacement: each slot first draws a class
// uniformly, then an instance uniformly within that class.
inline std::vector<int> class_balanced_epoch(const std::vector<std::vector<int>>& by_class,
                                             int epoch_len, Rng& rng) {
    if (epoch_len < 1) throw ConfigError("class_balanced_epoch: epoch_len must be >= 1");
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (by_class[c].empty()) {
            throw ConfigError("class_balanced_epoch: class " + std::to_string(c) +
                              " has no instances to sample from");
        }
    }
    std::vector<int> order(static_cast<std::size_t>(epoch_len));
    auto num_classes = static_cast<std::uint32_t>(by_class.size());
    for (int i = 0; i < epoch_len; ++i) {
        const std::vector<int>& bucket = by_class[rng.uniform_int(num_classes)];
        order[static_cast<std::size_t>(i)] =
            bucket[rng.uniform_int(static_cast<std::uint32_t>(bucket.size()))];
    }
    return order;
}

}  // namespace tailforge::sampling
