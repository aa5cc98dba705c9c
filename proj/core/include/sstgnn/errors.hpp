#pragma once

#include <stdexcept>
#include <string>

namespace sstgnn {

/// Shapes of operands do not fit the operation.
class DimensionError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

/// A caller broke an API precondition (wrong node kind, bad order, ...).
class ContractError : public std::logic_error {
public:
	using std::logic_error::logic_error;
};

/// Malformed or inconsistent input data (files, tables, indices).
class DataError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Invalid configuration values.
class ConfigError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// NaN/Inf encountered during training or evaluation.
class NumericalError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

} // namespace sstgnn
