#pragma once

#include <functional>

#include "inrd/linalg.hpp"

namespace inrd {

using ScalarField = std::function<double(ConstVecView)>;

inline constexpr double kDefaultGradientStep = 1e-5;
inline constexpr double kDefaultHessianStep = 1e-3;
inline constexpr std::size_t kMaxHessianDim = 256;

/// Central differences (f(s+h·e_i) − f(s−h·e_i)) / 2h.
Vec64 fd_gradient(const ScalarField& f, ConstVecView s, double h = kDefaultGradientStep);

/// Second central differences, symmetrised as (H + Hᵀ)/2. Throws for dim > kMaxHessianDim.
Mat64 fd_hessian(const ScalarField& f, ConstVecView s, double h = kDefaultHessianStep);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
Vec64 symmetric_eigenvalues(const Mat64& h);

/// Smallest eigenvalue of a symmetric matrix. Throws if |H − Hᵀ| exceeds 1e-8·max(1, ‖H‖).
double min_eigenvalue(const Mat64& h);

}  // namespace inrd
