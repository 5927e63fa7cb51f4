from setuptools import find_packages, setup

with open("requirements.txt") as install_requires_file:
    install_requires = install_requires_file.read().strip().split("\n")

with open("requirements-dev.txt") as dev_requires_file:
    dev_requires = dev_requires_file.read().strip().split("\n")

with open("README.md") as readme_file:
    readme = readme_file.read()

version = {}
with open("prefect_octacage/_version.py") as version_file:
    exec(version_file.read(), version)

setup(
    name="prefect-octacage",
    description=(
        "Prefect flows for variational eigenstates of two positive charges "
        "in an octahedral cage"
    ),
    license="Apache License 2.0",
    keywords="prefect",
    long_description=readme,
    long_description_content_type="text/markdown",
    version=version["__version__"],
    packages=find_packages(exclude=("tests", "docs")),
    python_requires=">=3.8",
    install_requires=install_requires,
    extras_require={"dev": dev_requires},
    entry_points={
        "prefect.collections": [
            "prefect_octacage = prefect_octacage",
        ],
        "console_scripts": [
            "octacage = prefect_octacage.cli:app",
        ],
    },
    classifiers=[
        "Natural Language :: English",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Programming Language :: Python :: 3 :: Only",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Physics",
    ],
)
