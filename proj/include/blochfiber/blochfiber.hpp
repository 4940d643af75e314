#pragma once

#include "blochfiber/core.hpp"
#include "blochfiber/hilbert.hpp"
#include "blochfiber/finite_bf.hpp"
#include "blochfiber/transform.hpp"
#include "blochfiber/models.hpp"
#include "blochfiber/topology.hpp"
