#pragma once

#include <doctest.h>

#include <string>

#include "ioev/core/error.hpp"

// Asserts that expr throws ioev::Error with the given code.
#define CHECK_ERROR_CODE(expr, expected_code)                                             \
    do {                                                                                  \
        bool ioev_thrown_ = false;                                                        \
        try {                                                                             \
            (void)(expr);                                                                 \
        } catch (const ioev::Error& ioev_e_) {                                            \
            ioev_thrown_ = true;                                                          \
            CHECK_MESSAGE(ioev_e_.code() == (expected_code), "got " << ioev_e_.what());   \
        }                                                                                 \
        CHECK_MESSAGE(ioev_thrown_, "expected ioev::Error from " #expr);                  \
    } while (false)

inline std::string data_path(const std::string& rel) { return std::string(IOEV_DATA_DIR) + "/" + rel; }
