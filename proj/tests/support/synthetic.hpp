#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "denoiserank/letor.hpp"

namespace denoiserank::testing {

struct SyntheticSpec {
  std::size_t queries = 50;
  std::size_t docs = 20;
  std::size_t features = 10;
  std::uint64_t seed = 1;
};

// Labels are a fixed bucketing of a fixed linear score of the features, so a
// per-document model can fit them exactly.
Dataset linear_dataset(const SyntheticSpec& spec);

// Labels depend on the rest of the list: documents whose feature sum is
// closest to the list's mean feature sum get the highest grades. Each list
// also carries a random offset shared by all of its documents, so no fixed
// per-document function of the features orders every list correctly.
Dataset context_dataset(const SyntheticSpec& spec);

// Grade 0..4 of the linear score used by linear_dataset.
int linear_label(std::span<const double> features);

// Writes `ds` in the SVMLight/LETOR text format with 1-based feature ids.
void write_letor(const Dataset& ds, const std::filesystem::path& path);

}  // namespace denoiserank::testing
