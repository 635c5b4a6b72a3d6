# sampling/admin.py
from django.contrib import admin
from django.utils.html import format_html, format_html_join

from .models import RunRecord


@admin.register(RunRecord)
class RunRecordAdmin(admin.ModelAdmin):
    list_display = ('command', 'seed', 'config_hash_display', 'nfe_batches', 'nfe_points', 'output_count',
                    'elapsed_seconds', 'created_at')
    list_filter = ('command', 'tool_version', 'created_at')
    search_fields = ('config_hash', 'output_dir')
    readonly_fields = ('config_hash', 'tool_version', 'input_hashes', 'outputs_display', 'started_at',
                       'finished_at', 'elapsed_seconds', 'created_at')

    fieldsets = (
        ('Run', {
            'fields': ('command', 'seed', 'options', 'output_dir')
        }),
        ('Config', {
            'fields': ('config', 'config_hash', 'input_hashes', 'tool_version'),
        }),
        ('Evaluations', {
            'fields': ('nfe_batches', 'nfe_evals', 'nfe_points'),
            'description': 'Buffer fills, model evaluations per chain, and points through the model'
        }),
        ('Outputs', {
            'fields': ('outputs_display', 'summary'),
        }),
        ('Timestamps', {
            'fields': ('started_at', 'finished_at', 'elapsed_seconds', 'created_at'),
        }),
    )

    def config_hash_display(self, obj):
        """Short config hash in list view"""
        if obj.config_hash:
            return format_html('<code>{}</code>', obj.config_hash[:12])
        return 'No config'
    config_hash_display.short_description = 'Config'

    def output_count(self, obj):
        return len(obj.outputs or [])
    output_count.short_description = 'Files'

    def outputs_display(self, obj):
        """Output files with schema and checksum"""
        if not obj.outputs:
            return 'No outputs'
        return format_html(
            '<ul>{}</ul>',
            format_html_join(
                '', '<li>{} ({} v{}) <code>{}</code></li>',
                ((o['path'], o['schema'], o['schema_version'], o['sha256'][:16]) for o in obj.outputs),
            ),
        )
    outputs_display.short_description = 'Output files'


admin.site.site_header = 'pfdiffkit Run Registry'
admin.site.site_title = 'pfdiffkit Admin'
admin.site.index_title = 'Sampling runs'
