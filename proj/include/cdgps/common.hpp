#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cdgps {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using IntVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using IntMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

namespace constants {
inline constexpr double kSpeedOfLight = 299792458.0;          // m/s
inline constexpr double kL1Frequency = 1575.42e6;             // Hz
inline constexpr double kL1Wavelength = kSpeedOfLight / kL1Frequency;
inline constexpr double kEarthMu = 3.986004418e14;            // m^3/s^2
inline constexpr double kEarthRadius = 6378137.0;             // m
inline constexpr double kEarthJ2 = 1.08262668e-3;
inline constexpr double kEarthRotationRate = 7.2921151467e-5;  // rad/s
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kArcsec = kPi / (180.0 * 3600.0);
inline constexpr double kDeg = kPi / 180.0;
}  // namespace constants

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// LDL factorization hit a non-positive pivot. `pivot()` is 1-based.
class DecompositionError : public Error {
 public:
  DecompositionError(int pivot, const std::string& what)
      : Error(what), pivot_(pivot) {}
  int pivot() const { return pivot_; }

 private:
  int pivot_;
};

class SingularGeometryError : public Error {
 public:
  using Error::Error;
};

class PairingError : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

class FrameError : public Error {
 public:
  using Error::Error;
};

class PropagationError : public Error {
 public:
  using Error::Error;
};

class LossOfLockError : public Error {
 public:
  using Error::Error;
};

class TimeTagError : public Error {
 public:
  using Error::Error;
};

class FixError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InsufficientChannelsError : public Error {
 public:
  using Error::Error;
};

/// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace cdgps
