from setuptools import setup, find_packages

with open("./README.md", "r") as f:
    long_description = f.read()

setup(
    name="stakhanov",
    version="0.1.0",
    description="Identification of top performers in national science systems from author-level publication data.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="MIT",
    keywords="scientometrics bibliometrics productivity",
    python_requires=">=3.8",
    packages=find_packages(exclude=["benchmark", "test", "scripts"]),
    install_requires=[
        "casanova>=2.0.2,<3",
        "ebbe>=1.11.0,<2",
        "numpy>=1.22",
        "quenouille>=1.4.2,<2",
        "scipy>=1.8",
    ],
    extras_require={
        ":python_version<'3.11'": ["tomli>=2"],
    },
    entry_points={
        "console_scripts": [
            "stakhanov=stakhanov.__main__:main",
            "stk=stakhanov.__main__:main",
        ]
    },
    zip_safe=True,
)
