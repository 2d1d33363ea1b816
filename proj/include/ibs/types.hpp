#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace ibs {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Tolerances shared by tests, the self-test and the acceptance suite.
namespace tol {
inline constexpr double kAdjoint = 1e-10;        // <Av,u> vs <v,A^H u>, relative
inline constexpr double kUnitary = 1e-10;        // ||XX^H - I||_max
inline constexpr double kKernelOracle = 1e-12;   // FFT/FWHT vs naive O(n^2)
inline constexpr double kConstraint = 1e-12;     // sensing diagonal constraints
inline constexpr double kEigenIterative = 1e-6;  // power iteration bounds
}  // namespace tol

double squared_norm(const CVec& v);
cplx inner(const CVec& a, const CVec& b);  // sum conj(a_i) b_i

}  // namespace ibs
