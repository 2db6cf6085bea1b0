#pragma once

// Umbrella header.

#include "trms/errors.hpp"
#include "trms/integrate.hpp"
#include "trms/plant.hpp"
#include "trms/linalg.hpp"
#include "trms/multimodel.hpp"
#include "trms/synthesis.hpp"
#include "trms/observer.hpp"
#include "trms/ftc.hpp"
#include "trms/harness.hpp"
#include "trms/io.hpp"
