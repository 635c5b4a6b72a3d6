# Generated by Django 4.2.7 on 2026-10-17 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('sample', 'Sample'), ('diagnose', 'Diagnose'), ('search', 'Search'), ('prop1', 'Proposition check'), ('metrics', 'Metrics')], max_length=20)),
                ('options', models.JSONField(default=dict)),
                ('config', models.JSONField(default=dict)),
                ('config_hash', models.CharField(blank=True, max_length=64)),
                ('seed', models.BigIntegerField(blank=True, null=True)),
                ('tool_version', models.CharField(max_length=20)),
                ('input_hashes', models.JSONField(default=dict)),
                ('nfe_batches', models.IntegerField(blank=True, null=True)),
                ('nfe_evals', models.IntegerField(blank=True, null=True)),
                ('nfe_points', models.BigIntegerField(blank=True, null=True)),
                ('outputs', models.JSONField(default=list)),
                ('summary', models.JSONField(default=dict)),
                ('output_dir', models.CharField(max_length=500)),
                ('started_at', models.DateTimeField()),
                ('finished_at', models.DateTimeField()),
                ('elapsed_seconds', models.FloatField(default=0.0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
