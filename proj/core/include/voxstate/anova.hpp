#pragma once

#include <string>
#include <vector>

#include "voxstate/matrix.hpp"

namespace voxstate {

// Result of top-m voxel selection. indices point into the masked voxel
// space of the scored matrix; f_scores keeps the score of every scored
// voxel, selected or not.
struct FeatureSelection {
  std::size_t m = 0;
  std::vector<std::size_t> indices;
  std::vector<double> f_scores;

  void validate() const;
};

/**
 * One-way ANOVA F per column of x (samples x voxels), grouping rows by
 * label:
 *   F = [sum_c n_c (mean_c - mean)^2 / (C - 1)] /
 *       [sum_c sum_i (x_ci - mean_c)^2 / (N - C)]
 * Zero within-class variance with nonzero between-class variance maps to
 * +infinity; zero variance of both kinds maps to 0. Requires at least
 * two distinct labels and at least two samples in every class.
 */
std::vector<double> f_scores(const Matrix& x, const std::vector<int>& y);

// The m highest-F voxels, ties broken toward the lower index; returned
// indices ascending.
FeatureSelection select_top_m(const std::vector<double>& f, std::size_t m);

// JSON {m, indices, f_scores}. +infinity scores are stored as JSON null
// (JSON has no Infinity literal) and restored as +infinity on read.
void write_feature_selection(const std::string& path,
                             const FeatureSelection& sel);
FeatureSelection read_feature_selection(const std::string& path);

// Convenience: keep only the selected columns, preserving order.
Matrix select_columns(const Matrix& x, const std::vector<std::size_t>& indices);

}  // namespace voxstate
