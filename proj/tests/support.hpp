#pragma once

#include "wmkit/error.hpp"

#include <gtest/gtest.h>

namespace testing_support
{

/// Error code thrown by `fn`; records a failure if nothing is thrown.
template <typename Fn>
wmkit::ErrorCode code_of(Fn && fn)
{
  try {
    fn();
  } catch (const wmkit::Error & e) {
    return e.code();
  }
  ADD_FAILURE() << "expected wmkit::Error";
  return wmkit::ErrorCode::IoError;
}

}  // namespace testing_support
