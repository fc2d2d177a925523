#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace avatar {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using VecX = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using MatX = Eigen::MatrixXd;
using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

using Vec3f = Eigen::Vector3f;

// Base error type for the whole library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InputFormatError : public Error {
public:
    explicit InputFormatError(const std::string& msg) : Error(msg) {}
};

class DegeneratePoseError : public Error {
public:
    explicit DegeneratePoseError(const std::string& msg) : Error(msg) {}
};

}  // namespace avatar
