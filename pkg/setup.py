from setuptools import setup, find_packages

setup(
    name="grid-robustness",
    version="0.1.0",
    packages=find_packages(include=["grid_robustness", "grid_robustness.*"]),
    package_data={"grid_robustness": ["cases/*.json"]},
    install_requires=[
        "numpy>=1.23",
        "scipy>=1.9",
        "networkx>=2.8",
        "pandas>=1.5",
        "matplotlib>=3.6",
        "pytest>=7.0.0",
        "pytest-asyncio>=0.20.0",
    ],
    entry_points={"console_scripts": ["grid-robustness=grid_robustness.cli:main"]},
)
