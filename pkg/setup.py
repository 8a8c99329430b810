from setuptools import setup, find_packages

setup(
    name="chunkstack",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    python_requires=">=3.9",
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "pydantic>=2",
        "click>=8.1,<8.2",
    ],
    extras_require={
        "test": ["pytest", "pytest-cov", "hypothesis"],
    },
    entry_points={
        "console_scripts": [
            "chunkstack = chunkstack.cli.main:cli",
        ],
    },
)
