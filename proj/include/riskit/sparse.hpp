// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "riskit/errors.hpp"
#include "riskit/rng.hpp"
#include "riskit/types.hpp"

namespace riskit::sparse {

enum class ArrayKind { ula, upa };

struct Dictionary {
    CMat atoms;
    CMat gram;  // atoms^H atoms, filled by the factories
    ArrayKind kind = ArrayKind::ula;
    int size_x = 1;                // array size along x (the whole ULA for kind == ula)
    int size_z = 1;
    std::vector<double> grid_x;    // per-axis frequency grid, strictly increasing
    std::vector<double> grid_z;    // single 0 entry for a ULA

    int columns() const { return static_cast<int>(atoms.cols()); }
    // Spatial frequencies of column c (upa columns are ordered x-major).
    double freq_x(int c) const;
    double freq_z(int c) const;
    // Column index of the grid point nearest (wx, wz) modulo 2 pi.
    int nearest(double wx, double wz = 0.0) const;
};

// Thrown when the grid has fewer points than the array has elements.
class UndercompleteDictionary : public DomainError {
public:
    using DomainError::DomainError;
};

Dictionary make_dictionary_ula(int n, int g, bool allow_undercomplete = false);
// g must be a perfect square; sqrt(g) points per axis.
Dictionary make_dictionary_upa(int m_x, int m_z, int g, bool allow_undercomplete = false);

struct SparseSolution {
    std::vector<int> support;
    CVec gains;
    double residual_norm = 0.0;
    std::vector<double> residual_trace;  // entry 0 is ||y||
};

// Orthogonal matching pursuit. Stops after max_atoms selections, once the
// residual norm is <= tol, or when the residual has no correlation left with
// any unused column (in which case it reports what it has).
SparseSolution omp_solve(const CVec& y, const CMat& a, int max_atoms, double tol = 0.0);

struct MmvSolution {
    std::vector<int> support;
    CMat gains;   // |support| x columns of Y
    double residual_norm = 0.0;
    std::vector<double> residual_trace;
};

// Simultaneous OMP for several measurement vectors sharing one support.
MmvSolution somp_solve(const CMat& y, const CMat& a, int max_atoms, double tol = 0.0);

// Y = sqrt(P) G Xi + N, Xi = [theta_1 ... theta_T] (M x T), unit pilot symbols.
struct CascadedObservation {
    CMat y;
    CMat training;
    double p = 1.0;
};

CascadedObservation observe_cascaded(const CMat& g, const CMat& training, double p, double sigma2, Rng& rng);

struct OneStageResult {
    CMat g_hat;
    std::vector<int> bs_index;    // per selected atom
    std::vector<int> ris_index;
    CVec gains;
};

struct OneStageOptions {
    int sparsity = 1;
    double tol = 0.0;
    // Upper bound on the composite dictionary width G_B * G_R.
    double column_budget = 1.0e7;
};

// Joint recovery over the Kronecker-structured dictionary. The cascaded RIS
// response depends only on the difference of the two RIS-side frequencies, so
// on a uniform grid the G_B G_R^2 composite collapses to G_B G_R columns.
OneStageResult one_stage_estimate(const CascadedObservation& obs, const Dictionary& bs, const Dictionary& ris,
                                  const OneStageOptions& opt);

enum class TwoStageMode { correlation_ignored, correlation_based };

struct TwoStageOptions {
    int l_br = 1;
    int l_ru = 1;
    TwoStageMode mode = TwoStageMode::correlation_ignored;
    // Relative stage-1 residual above which the run fails; infinity disables.
    double stage1_tol = std::numeric_limits<double>::infinity();
};

struct TwoStageResult {
    CMat g_hat;
    std::vector<double> omega_bh;
    std::vector<int> bs_index;
    int full_solves = 0;   // L_RU-sparse recoveries
    int single_solves = 0; // one-dimensional searches
};

TwoStageResult two_stage_estimate(const CascadedObservation& obs, const Dictionary& bs, const Dictionary& ris,
                                  const TwoStageOptions& opt);

struct BeamChoice {
    int bs_index = 0;
    int ris_index = 0;
    double power = 0.0;
};

using PowerOracle = std::function<double(const CVec& bs_beam, const CVec& ris_phases)>;

BeamChoice beam_train_exhaustive(const PowerOracle& oracle, const std::vector<CVec>& bs_codebook,
                                 const std::vector<CVec>& ris_codebook);

double nmse(const CMat& g_hat, const CMat& g);

enum class CsMethod { one_stage, two_stage, multi_user_jiechen, multi_user_gui };

struct OverheadParams {
    int l_br = 1;
    int l_ru = 1;
    int n = 1;
    int m = 1;
    int k = 1;
    int g_b = 0;  // 0 selects 4 N
    int g_r = 0;  // 0 selects 4 M
};

// Compressed-sensing pilot-overhead scaling laws (natural logarithm).
double cs_pilot_overhead(CsMethod method, const OverheadParams& p);

} // namespace riskit::sparse
