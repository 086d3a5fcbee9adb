#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

#include "nscl/harness.hpp"

namespace nscl {

namespace schema {
inline constexpr std::string_view metrics = "task,acc_so_far,bwt_so_far,bwt_defined";
inline constexpr std::string_view accuracy_matrix = "after_task,eval_task,accuracy";
inline constexpr std::string_view train_loss = "after_task,eval_task,train_loss";
inline constexpr std::string_view diagnostics =
    "task,step,loss,inner_product,grad_norm,update_norm";
inline constexpr std::string_view task_summary =
    "task,initial_loss,final_loss,steps,nonpositive_inner_steps,min_inner_product,"
    "empty_basis_steps";
inline constexpr std::string_view spectrum = "index,eigenvalue,retained";
inline constexpr std::string_view spectrum_summary =
    "task,layer,h,k,lambda_min,cutoff,r_proportion";
}  // namespace schema

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Writes every artifact of a run under `dir` (created if missing):
///   metrics.csv, accuracy_matrix.csv, train_loss.csv, diagnostics.csv,
///   task_summary.csv, spectra/summary.csv, spectra/task<t>_layer<l>.csv,
///   covariance.bin. Tasks and layers are numbered from 1.
void write_run_report(const std::filesystem::path& dir, const RunReport& report);

/// Writes spectra/summary.csv and per-layer spectra for one basis under `dir`.
void write_spectra(const std::filesystem::path& dir, const NullSpaceBasis& basis);

}  // namespace nscl
