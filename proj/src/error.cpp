#include "drd/error.hpp"

namespace drd {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument:
            return "invalid argument";
        case ErrorKind::degenerate_features:
            return "degenerate features";
        case ErrorKind::numerical_failure:
            return "numerical failure";
        case ErrorKind::zero_vector:
            return "zero vector";
        case ErrorKind::degenerate_test:
            return "degenerate test";
        case ErrorKind::pretraining_failure:
            return "pretraining failure";
        case ErrorKind::not_found:
            return "not found";
        case ErrorKind::validation:
            return "validation";
        case ErrorKind::io:
            return "io";
    }
    return "unknown";
}

}  // namespace drd
