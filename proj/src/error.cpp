#include "stgf/error.hpp"

namespace stgf {

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Usage:
        case ErrorKind::Config:
        case ErrorKind::Parameter:
            return 2;
        case ErrorKind::Data:
        case ErrorKind::Format:
        case ErrorKind::Io:
        case ErrorKind::Dimension:
        case ErrorKind::DegenerateGraph:
        case ErrorKind::Contract:
            return 3;
        case ErrorKind::Numerical:
        case ErrorKind::Convergence:
        case ErrorKind::Calibration:
            return 4;
    }
    return 1;
}

}  // namespace stgf
