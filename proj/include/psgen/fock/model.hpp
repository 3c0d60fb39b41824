#pragma once

#include <cmath>
#include <string>

#include "psgen/common/error.hpp"

namespace psgen::fock {

/// Physical parameters of a photon-subtracted two-mode squeezed vacuum.
///
/// Mode 1 is tapped by a beamsplitter of reflectivity `R1` and `n_sub`
/// photons are detected in the tap; mode 2 likewise with `R2` and `m_sub`.
/// The transmitted modes then pass loss channels of transmissivity
/// `eta1`/`eta2`. The squeezing phase is fixed to zero.
struct SubtractionModel {
  double r = 0.0;
  double R1 = 0.0;
  double R2 = 0.0;
  double eta1 = 1.0;
  double eta2 = 1.0;
  int n_sub = 0;
  int m_sub = 0;

  /// Symmetric model: equal reflectivities on both modes.
  static SubtractionModel symmetric(double r, double reflectivity, double eta1,
                                    double eta2, int n, int m) {
    SubtractionModel model{r, reflectivity, reflectivity, eta1, eta2, n, m};
    model.validate();
    return model;
  }

  SubtractionModel with_signature(int n, int m) const {
    SubtractionModel out = *this;
    out.n_sub = n;
    out.m_sub = m;
    return out;
  }

  SubtractionModel lossless() const {
    SubtractionModel out = *this;
    out.eta1 = 1.0;
    out.eta2 = 1.0;
    return out;
  }

  void validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("squeezing r must be finite and >= 0");
    if (!unit(R1) || !unit(R2)) throw DomainError("reflectivities must lie in [0, 1]");
    if (!unit(eta1) || !unit(eta2)) throw DomainError("transmissivities must lie in [0, 1]");
    if (n_sub < 0 || m_sub < 0) throw DomainError("subtracted photon counts must be >= 0");
  }

  double t_r() const { return std::tanh(r); }

  /// Effective squeezing t_r * sqrt((1-R1)(1-R2)).
  double lambda() const { return t_r() * std::sqrt((1.0 - R1) * (1.0 - R2)); }

  /// sqrt((1-eta1)(1-eta2)).
  double nu() const { return std::sqrt((1.0 - eta1) * (1.0 - eta2)); }

  bool is_lossless() const { return eta1 == 1.0 && eta2 == 1.0; }

  int k_min() const { return n_sub > m_sub ? n_sub : m_sub; }

  std::string describe() const {
    return "r=" + std::to_string(r) + " R1=" + std::to_string(R1) + " R2=" + std::to_string(R2) +
           " eta1=" + std::to_string(eta1) + " eta2=" + std::to_string(eta2) + " (n,m)=(" +
           std::to_string(n_sub) + "," + std::to_string(m_sub) + ")";
  }
};

}  // namespace psgen::fock
