#pragma once

#include <gtest/gtest.h>

#include "oracle.hpp"
