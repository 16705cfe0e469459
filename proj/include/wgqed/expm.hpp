#pragma once

// Matrix exponential by scaling and squaring with diagonal Pade approximants
// (orders 3, 5, 7, 9 and 13 selected from the 1-norm, Higham 2005).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>

namespace wgqed {

namespace detail {

template <typename Mat>
double one_norm(const Mat& a) {
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

template <typename Mat, std::size_t N>
void pade_low_order(const Mat& a, const std::array<double, N>& b, Mat& u, Mat& v) {
  const Mat id = Mat::Identity(a.rows(), a.cols());
  const Mat a2 = a * a;
  Mat power = id;
  Mat odd = Mat::Zero(a.rows(), a.cols());
  Mat even = Mat::Zero(a.rows(), a.cols());
  for (std::size_t k = 0; k + 1 < N; k += 2) {
    even += b[k] * power;
    odd += b[k + 1] * power;
    power = power * a2;
  }
  u = a * odd;
  v = even;
}

}  // namespace detail

/// exp(a) for a square dense (real or complex) Eigen matrix.
template <typename Mat>
Mat expm(const Mat& a) {
  using detail::one_norm;
  constexpr std::array<double, 4> b3{120.0, 60.0, 12.0, 1.0};
  constexpr std::array<double, 6> b5{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
  constexpr std::array<double, 8> b7{17297280.0, 8648640.0, 1995840.0, 277200.0,
                                     25200.0,    1512.0,    56.0,      1.0};
  constexpr std::array<double, 10> b9{17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                                      30270240.0,    2162160.0,    110880.0,     3960.0,
                                      90.0,          1.0};
  constexpr std::array<double, 14> b13{
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
      129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
      1323241920.0,        40840800.0,          960960.0,           16380.0,
      182.0,               1.0};
  constexpr std::array<double, 4> theta{1.495585217958292e-2, 2.539398330063230e-1,
                                        9.504178996162932e-1, 2.097847961257068e0};
  constexpr double theta13 = 5.371920351148152e0;

  const double norm = one_norm(a);
  Mat u, v;
  if (norm <= theta[0]) {
    detail::pade_low_order(a, b3, u, v);
  } else if (norm <= theta[1]) {
    detail::pade_low_order(a, b5, u, v);
  } else if (norm <= theta[2]) {
    detail::pade_low_order(a, b7, u, v);
  } else if (norm <= theta[3]) {
    detail::pade_low_order(a, b9, u, v);
  }
  if (norm <= theta[3]) return (v - u).partialPivLu().solve(v + u);

  const int squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))));
  const Mat as = a / std::ldexp(1.0, squarings);
  const Mat id = Mat::Identity(a.rows(), a.cols());
  const Mat a2 = as * as;
  const Mat a4 = a2 * a2;
  const Mat a6 = a4 * a2;
  u = as * (a6 * (b13[13] * a6 + b13[11] * a4 + b13[9] * a2) + b13[7] * a6 + b13[5] * a4 +
            b13[3] * a2 + b13[1] * id);
  v = a6 * (b13[12] * a6 + b13[10] * a4 + b13[8] * a2) + b13[6] * a6 + b13[4] * a4 +
      b13[2] * a2 + b13[0] * id;
  Mat r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  return r;
}

}  // namespace wgqed
