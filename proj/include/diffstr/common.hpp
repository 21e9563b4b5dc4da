#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace diffstr {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using MatD = Mat<double>;
using MatF = Mat<float>;
using VecD = Vec<double>;

/// Base class for all library errors. Subcommands catch this at the top
/// level and turn it into a nonzero exit with the message on stderr.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DIFFSTR_DEFINE_ERROR(NAME)              \
  class NAME : public Error {                   \
   public:                                      \
    using Error::Error;                         \
  }

DIFFSTR_DEFINE_ERROR(UnknownCharacter);
DIFFSTR_DEFINE_ERROR(LabelTooLong);
DIFFSTR_DEFINE_ERROR(NotClean);
DIFFSTR_DEFINE_ERROR(InvalidT);
DIFFSTR_DEFINE_ERROR(StepOutOfRange);
DIFFSTR_DEFINE_ERROR(BadDistribution);
DIFFSTR_DEFINE_ERROR(MassOnMask);
DIFFSTR_DEFINE_ERROR(ShapeMismatch);
DIFFSTR_DEFINE_ERROR(GlyphMissing);
DIFFSTR_DEFINE_ERROR(MissingLabelsFile);
DIFFSTR_DEFINE_ERROR(UnreadableImage);
DIFFSTR_DEFINE_ERROR(NonFiniteLoss);
DIFFSTR_DEFINE_ERROR(MismatchedProtocol);
DIFFSTR_DEFINE_ERROR(ConfigError);
DIFFSTR_DEFINE_ERROR(IoError);

#undef DIFFSTR_DEFINE_ERROR

}  // namespace diffstr
