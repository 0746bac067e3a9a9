#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tmle {

// Population unit label. Realized populations number their units 1..N.
enum class UnitId : std::uint64_t {};

constexpr std::uint64_t raw(UnitId id) { return static_cast<std::uint64_t>(id); }
constexpr UnitId unit_id(std::uint64_t k) { return static_cast<UnitId>(k); }

enum class Task { regression, classification };

std::string to_string(Task task);

// Row-major feature table keyed by unit id.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  UnitId id(std::size_t row) const { return ids_[row]; }
  const std::vector<UnitId>& ids() const { return ids_; }

  std::span<const double> row(std::size_t row) const {
    return {values_.data() + row * dim_, dim_};
  }
  std::span<double> row(std::size_t row) { return {values_.data() + row * dim_, dim_}; }
  double at(std::size_t row, std::size_t col) const { return values_[row * dim_ + col]; }

  void reserve(std::size_t rows) {
    ids_.reserve(rows);
    values_.reserve(rows * dim_);
  }
  void push_back(UnitId id, std::span<const double> x);

  // Values of one column in row order.
  std::vector<double> column(std::size_t col) const;

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<UnitId> ids_;
  std::vector<double> values_;
};

}  // namespace tmle
