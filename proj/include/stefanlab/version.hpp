#pragma once

#define STEFANLAB_VERSION "0.1.0"
