from setuptools import setup, find_packages

setup(
    name="maxq-hrl",
    version="1.0.0",
    packages=find_packages(exclude=["tests", "examples*"]),
    include_package_data=True,
    install_requires=[
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "python-dotenv>=1.0.0",
        "click>=8.1.3",
        "pytest>=7.3.1",
        "pytest-asyncio>=0.21.0",
        "loguru>=0.7.0",
        "pandas>=2.0.0",
        "pydantic>=2.0.0",
    ],
    extras_require={
        "plot": ["matplotlib>=3.7.0"],
    },
    entry_points={
        "console_scripts": [
            "maxq=app.main:cli",
        ],
    },
    description="Tabular MAXQ hierarchical reinforcement learning engine and benchmark harness",
    keywords="reinforcement learning, hierarchical, maxq, smdp, taxi",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    python_requires=">=3.9",
)
