"""
Test that every module imports and the public classes instantiate
"""

import importlib

import pytest

MODULES = [
    'src.errors',
    'src.settings',
    'src.algebra',
    'src.asymptotics',
    'src.detectors',
    'src.configuration',
    'src.forces',
    'src.field',
    'src.conserved',
    'src.dynamics',
    'src.cauchy',
    'src.data_loader',
    'src.experiments',
    'src.cli',
]


@pytest.mark.parametrize('name', MODULES)
def test_module_imports(name):
    assert importlib.import_module(name) is not None


def test_package_exports():
    import src

    assert src.__version__
    for name in src.__all__:
        assert hasattr(src, name)


def test_basic_instantiation():
    from src import DataLoader, IntegratorOptions, QuadratureSpec, SolitonIntegrator

    assert DataLoader().output_dir is None
    assert SolitonIntegrator().options == IntegratorOptions()
    assert QuadratureSpec().nodes == 100_000
