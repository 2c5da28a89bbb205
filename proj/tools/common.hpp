#pragma once

#include <exception>
#include <functional>
#include <iostream>

#include "ioev/core/error.hpp"

// Runs a subcommand body; library errors print as "error: Code: message" with exit code 2.
inline int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const ioev::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
